"""Judge-aware Bradley-Terry-Luce ranking.

Jointly estimates candidate quality scores and per-judge discrimination
parameters from pairwise verdicts, with plug-in Wald inference.
"""

from ._backend import BACKEND
from .data import (ComparisonRecord, ConnectivityReport, Dataset, TripleStats, TripleTable,
                   aggregate, canonicalize, check_connectivity, load_records)
from .estimator import FitConfig, FitResult, StopReason, fit_unweighted, fit_weighted
from .inference import (ConfidenceInterval, CovarianceEstimate, covariance, fisher_information,
                        rank_agreement, wald_ci_component, wald_ci_linear)
from .model import (Design, Params, gauge_transform, grad_log_likelihood, log_likelihood,
                    predict_prob, project_to_constraints)
from .simulator import (StudyConfig, TruthSpec, gen_truth, run_coverage_study, run_mse_study,
                        run_subsample_study, simulate_comparisons, simulate_triples)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ComparisonRecord", "ConfidenceInterval", "ConnectivityReport",
    "CovarianceEstimate", "Dataset", "Design", "FitConfig", "FitResult", "Params",
    "StopReason", "StudyConfig", "TripleStats", "TripleTable", "TruthSpec", "aggregate",
    "canonicalize", "check_connectivity", "covariance", "fisher_information", "fit_unweighted",
    "fit_weighted", "gauge_transform", "gen_truth", "grad_log_likelihood", "load_records",
    "log_likelihood", "predict_prob", "project_to_constraints", "rank_agreement",
    "run_coverage_study", "run_mse_study", "run_subsample_study", "simulate_comparisons",
    "simulate_triples", "wald_ci_component", "wald_ci_linear",
]
