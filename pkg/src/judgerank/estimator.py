"""Constrained maximum likelihood for the judge-aware and unweighted BTL models."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend
from .data import TripleTable, check_connectivity
from .errors import ConfigError, DisconnectedGraphError, EmptyDataError, InvalidRecordError
from .model import Params, log_likelihood, project_to_constraints

SEPARATION_Z = 30.0


class StopReason(str, enum.Enum):
    GRAD_TOL = "grad_tol"
    PARAM_TOL = "param_tol"
    MAX_ITERS = "max_iters"
    SEPARATION = "separation_detected"


_STOP_CODES = {0: StopReason.GRAD_TOL, 1: StopReason.PARAM_TOL,
               2: StopReason.MAX_ITERS, 3: StopReason.SEPARATION}


@dataclass(frozen=True)
class FitConfig:
    learning_rate: float = 0.05
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    max_iters: int = 20000
    grad_tol: float = 1e-7
    param_tol: float = 1e-9
    seed: int = 0
    init_scale: float = 0.01
    trace: bool = False

    def __post_init__(self):
        for name in ("learning_rate", "adam_epsilon", "grad_tol", "param_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name}: must lie in [0, 1)")
        if int(self.max_iters) < 1:
            raise ConfigError("max_iters: must be >= 1")
        if self.init_scale < 0:
            raise ConfigError("init_scale: must be nonnegative")

    @classmethod
    def from_dict(cls, obj, path="fit") -> "FitConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"{path}: unknown fields {sorted(extra)}")
        try:
            return cls(**obj)
        except ConfigError as exc:
            raise ConfigError(f"{path}.{exc}") from None


@dataclass(frozen=True, eq=False)
class FitResult:
    params: Params
    final_loglik: float
    iterations: int
    converged: bool
    stop_reason: StopReason
    model: str = "weighted"
    n_comparisons: int = 0
    trace: np.ndarray | None = field(default=None, repr=False)

    @property
    def gamma(self) -> np.ndarray:
        return self.params.gamma

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": self.params.to_dict(),
            "gamma": self.params.gamma.tolist(),
            "final_loglik": self.final_loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason.value,
            "n_comparisons": self.n_comparisons,
        }

    @classmethod
    def from_dict(cls, obj) -> "FitResult":
        return cls(Params.from_dict(obj["params"]), float(obj["final_loglik"]),
                   int(obj["iterations"]), bool(obj["converged"]),
                   StopReason(obj["stop_reason"]), obj.get("model", "weighted"),
                   int(obj.get("n_comparisons", 0)))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def write_trace(self, stream) -> None:
        """Per-iteration CSV ``iter,loglik,grad_norm`` (requires ``trace=True``)."""
        if self.trace is None:
            raise ValueError("fit was run without trace=True")
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["iter", "loglik", "grad_norm"])
        for it, ll, g in self.trace:
            w.writerow([int(it), repr(float(ll)), repr(float(g))])


def _validate(triples: TripleTable, n_candidates, n_judges):
    if len(triples) == 0:
        raise EmptyDataError("no comparisons to fit")
    if triples.i.min() < 0 or triples.j.max() >= n_candidates:
        raise InvalidRecordError(f"candidate index out of range [0, {n_candidates})")
    if triples.k.min() < 0 or triples.k.max() >= n_judges:
        raise InvalidRecordError(f"judge index out of range [0, {n_judges})")
    if n_candidates != triples.n_candidates:
        triples = TripleTable.from_arrays(triples.i, triples.j, triples.k, triples.n,
                                          triples.y_bar, n_candidates, n_judges)
    report = check_connectivity(triples)
    if not report.connected:
        raise DisconnectedGraphError(report)


def _initial(N, K, config: FitConfig):
    rng = np.random.default_rng(config.seed)
    h = config.init_scale
    s = rng.uniform(-h, h, N) if h > 0 else np.zeros(N)
    a = rng.uniform(-h, h, K) if h > 0 else np.zeros(K)
    return project_to_constraints(Params(s, a))


def _run(triples, N, K, config, fit_alpha, model, kernels):
    config = config or FitConfig()
    kernels = kernels or _backend.kernels
    _validate(triples, N, K)
    init = _initial(N, K, config)
    s, alpha, iters, code, trace = kernels.adam(
        triples.i, triples.j, triples.k, triples.counts, triples.y_bar,
        init.s, init.alpha if fit_alpha else np.zeros(K), bool(fit_alpha),
        config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon,
        int(config.max_iters), config.grad_tol, config.param_tol, SEPARATION_Z,
        bool(config.trace))
    params = Params(s, alpha)
    reason = _STOP_CODES[int(code)]
    return FitResult(
        params=params,
        final_loglik=log_likelihood(params, triples, kernels),
        iterations=int(iters),
        converged=reason in (StopReason.GRAD_TOL, StopReason.PARAM_TOL),
        stop_reason=reason,
        model=model,
        n_comparisons=triples.total,
        trace=trace,
    )


def fit_weighted(triples: TripleTable, n_candidates=None, n_judges=None,
                 config: FitConfig | None = None, kernels=None) -> FitResult:
    """Jointly estimate scores and log-discriminations by projected Adam.

    Raises
    ------
    EmptyDataError
        If ``triples`` is empty.
    DisconnectedGraphError
        If some candidates are not linked by any chain of comparisons.
    """
    N = triples.n_candidates if n_candidates is None else int(n_candidates)
    K = triples.n_judges if n_judges is None else int(n_judges)
    return _run(triples, N, K, config, True, "weighted", kernels)


def fit_unweighted(triples: TripleTable, n_candidates=None, config: FitConfig | None = None,
                   kernels=None) -> FitResult:
    """Standard BTL fit, every judge fixed at ``gamma = 1``."""
    N = triples.n_candidates if n_candidates is None else int(n_candidates)
    return _run(triples, N, triples.n_judges, config, False, "unweighted", kernels)


def fit(triples: TripleTable, model="weighted", config=None, kernels=None) -> FitResult:
    if model == "weighted":
        return fit_weighted(triples, config=config, kernels=kernels)
    if model == "unweighted":
        return fit_unweighted(triples, config=config, kernels=kernels)
    raise ValueError(f"unknown model {model!r}")


def config_dict(config: FitConfig) -> dict:
    return asdict(config)
