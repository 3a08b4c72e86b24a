"""Plug-in asymptotic covariance, Wald intervals and rank agreement.

The Fisher information of the judge-aware model is singular along the
location shift ``(1_N, 0_K)`` and the scale gauge ``(s, -1_K)``. The
covariance of the normalized estimator is the pseudo-inverse of the
information restricted to the constraint plane ``sum(s) = sum(alpha) = 0``:
``Sigma = (P I P)^+`` with ``P`` the orthogonal projector onto that plane.
Its null space is spanned by the constraint normals ``(1_N, 0_K)`` and
``(0_N, 1_K)``, and it is a reflexive generalized inverse of ``I``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from statistics import NormalDist
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .errors import RankDeficiencyError
from .model import Design, Params, sigmoid

EIG_CUTOFF = 1e-10
RANK_CHECK = 1e-8


class GaugeWarning(UserWarning):
    """A linear functional has a component along a non-identified direction."""


def fisher_information(params: Params, design: Design, weighted: bool = True) -> np.ndarray:
    """Per-comparison information matrix in ``(s, alpha)`` coordinates.

    With ``weighted=False`` every judge is fixed at ``gamma = 1`` and the alpha
    rows and columns are zero.
    """
    N, K = params.n_candidates, params.n_judges
    if design.n_candidates != N or design.n_judges != K:
        raise ValueError("design and params disagree on N or K")
    pi = np.asarray(design.pi, dtype=np.float64)
    if len(pi) == 0 or not np.any(pi > 0):
        raise ValueError("degenerate design: no triple has positive probability")
    i, j, k = design.i, design.j, design.k
    rows = np.arange(len(pi))
    G = np.zeros((len(pi), N + K))
    if weighted:
        gam = params.gamma[k]
        z = gam * (params.s[i] - params.s[j])
        G[rows, i] = gam
        G[rows, j] = -gam
        G[rows, N + k] = z
    else:
        z = params.s[i] - params.s[j]
        G[rows, i] = 1.0
        G[rows, j] = -1.0
    p = sigmoid(z)
    w = pi * p * (1.0 - p)
    info = (G * w[:, None]).T @ G
    return 0.5 * (info + info.T)


def constraint_projector(n_candidates: int, n_judges: int, weighted: bool = True) -> np.ndarray:
    N, K = n_candidates, n_judges
    P = np.zeros((N + K, N + K))
    P[:N, :N] = np.eye(N) - 1.0 / N
    if weighted:
        P[N:, N:] = np.eye(K) - 1.0 / K
    return P


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """Asymptotic covariance of ``sqrt(T) (theta_hat - theta)`` over ``(s, alpha)``."""

    matrix: np.ndarray
    rank: int
    design: Design
    model: str = "weighted"

    @property
    def n_candidates(self):
        return self.design.n_candidates

    def variance(self, c) -> float:
        c = np.asarray(c, dtype=np.float64)
        return float(max(c @ self.matrix @ c, 0.0))

    def null_directions(self) -> list[np.ndarray]:
        N, K = self.design.n_candidates, self.design.n_judges
        shift = np.concatenate([np.ones(N), np.zeros(K)])
        if self.model == "weighted":
            return [shift, np.concatenate([np.zeros(N), np.ones(K)])]
        return [shift] + [np.eye(N + K)[N + q] for q in range(K)]


def covariance(params: Params, design: Design, weighted: bool = True) -> CovarianceEstimate:
    """Plug-in covariance via eigendecomposition of the constrained information.

    Raises
    ------
    RankDeficiencyError
        If the information is singular beyond the gauge directions, e.g.
        because the scores are (nearly) constant.
    """
    N, K = params.n_candidates, params.n_judges
    info = fisher_information(params, design, weighted)
    P = constraint_projector(N, K, weighted)
    J = P @ info @ P
    J = 0.5 * (J + J.T)
    evals, evecs = np.linalg.eigh(J)
    n_null = 2 if weighted else 1 + K
    rank = N + K - n_null
    top = evals[-1]
    if top <= 0 or evals[n_null] <= RANK_CHECK * top:
        raise RankDeficiencyError(
            f"information has rank below {rank}: eigenvalue {evals[n_null]:.3g} "
            f"vs largest {top:.3g}")
    keep = evals > EIG_CUTOFF * top
    V = evecs[:, keep]
    sigma = (V / evals[keep]) @ V.T
    sigma = 0.5 * (sigma + sigma.T)
    return CovarianceEstimate(sigma, int(keep.sum()), design,
                              "weighted" if weighted else "unweighted")


class ConfidenceInterval(NamedTuple):
    estimate: float
    lower: float
    upper: float
    level: float
    se: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def covers(self, value) -> bool:
        return self.lower <= value <= self.upper


def normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {p}")
    return NormalDist().inv_cdf(p)


def _z_for(level):
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    return normal_quantile(0.5 + level / 2.0)


def _theta(fit):
    params = fit.params if hasattr(fit, "params") else fit
    return params.theta


def wald_ci_linear(fit, cov: CovarianceEstimate, T: int, c, level: float = 0.95) -> ConfidenceInterval:
    """Interval for ``c @ theta``; warns if ``c`` touches a non-identified direction."""
    z = _z_for(level)
    if T < 1:
        raise ValueError("T must be >= 1")
    theta = _theta(fit)
    c = np.asarray(c, dtype=np.float64)
    if c.shape != theta.shape or not np.all(np.isfinite(c)):
        raise ValueError(f"coefficient vector must be finite with length {len(theta)}")
    cn = np.linalg.norm(c)
    for v in cov.null_directions():
        if cn > 0 and abs(c @ v) > 1e-8 * cn * np.linalg.norm(v):
            warnings.warn("functional is not orthogonal to the gauge/constraint directions; "
                          "its standard error reflects the normalization only",
                          GaugeWarning, stacklevel=2)
            break
    est = float(c @ theta)
    se = math.sqrt(cov.variance(c) / T)
    return ConfidenceInterval(est, est - z * se, est + z * se, level, se)


def wald_ci_component(fit, cov: CovarianceEstimate, T: int, index: int,
                      level: float = 0.95) -> ConfidenceInterval:
    """Interval for a single coordinate of ``(s, alpha)``."""
    z = _z_for(level)
    if T < 1:
        raise ValueError("T must be >= 1")
    theta = _theta(fit)
    est = float(theta[index])
    se = math.sqrt(max(float(cov.matrix[index, index]), 0.0) / T)
    return ConfidenceInterval(est, est - z * se, est + z * se, level, se)


def component_intervals(fit, cov, T, level=0.95, judges=False) -> list[ConfidenceInterval]:
    """Vectorized component intervals for all scores (and alphas if ``judges``)."""
    z = _z_for(level)
    theta = _theta(fit)
    n = len(theta) if judges else cov.design.n_candidates
    se = np.sqrt(np.maximum(np.diag(cov.matrix)[:n], 0.0) / T)
    return [ConfidenceInterval(float(theta[q]), float(theta[q] - z * se[q]),
                               float(theta[q] + z * se[q]), level, float(se[q]))
            for q in range(n)]


def difference_vector(n_candidates, n_judges, a, b) -> np.ndarray:
    c = np.zeros(n_candidates + n_judges)
    c[a] += 1.0
    c[b] -= 1.0
    return c


CI_COLUMNS = ("name", "estimate", "lower", "upper", "se", "level")


def ci_table(fit, cov, T, level=0.95, candidate_names=None, judge_names=None,
             judges=False, diffs: Sequence[tuple[int, int]] = ()) -> list[dict]:
    """Rows for the CI CSV: scores, optional log-gammas, then requested differences."""
    params = fit.params if hasattr(fit, "params") else fit
    N, K = params.n_candidates, params.n_judges
    cn = candidate_names or [f"m{q}" for q in range(N)]
    jn = judge_names or [f"j{q}" for q in range(K)]
    out = []
    for q, ci in enumerate(component_intervals(fit, cov, T, level, judges)):
        name = cn[q] if q < N else f"log_gamma[{jn[q - N]}]"
        out.append(dict(zip(CI_COLUMNS, (name, *ci[:3], ci.se, level))))
    for a, b in diffs:
        ci = wald_ci_linear(fit, cov, T, difference_vector(N, K, a, b), level)
        out.append(dict(zip(CI_COLUMNS, (f"{cn[a]} - {cn[b]}", *ci[:3], ci.se, level))))
    return out


def write_ci_csv(rows, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CI_COLUMNS)
    for r in rows:
        w.writerow([r["name"]] + [repr(float(r[c])) for c in CI_COLUMNS[1:]])


class RankAgreement(NamedTuple):
    spearman: float
    pearson: float
    kendall: float


def rank_agreement(x, y) -> RankAgreement:
    """Spearman (average ranks), Pearson and Kendall tau-b between two score vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("score vectors must be 1-D, equal length and have >= 2 entries")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("correlation is undefined for a constant score vector")
    return RankAgreement(float(stats.spearmanr(x, y).statistic),
                         float(stats.pearsonr(x, y).statistic),
                         float(stats.kendalltau(x, y, variant="b").statistic))


def ranks_descending(scores) -> np.ndarray:
    """1-based leaderboard positions, highest score first (ties by index)."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((np.arange(len(scores)), -scores))
    pos = np.empty(len(scores), dtype=np.int64)
    pos[order] = np.arange(1, len(scores) + 1)
    return pos
