"""Judge-aware BTL likelihood over the normalized parameter space.

Judge discrimination is carried as ``alpha = log(gamma)`` throughout; gamma
only appears at I/O boundaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .data import TripleTable

NORMALIZATION_TOL = 1e-10


def sigmoid(z):
    """Logistic function, evaluated without overflow for any finite ``z``."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def log_sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = -(np.maximum(-z, 0.0) + np.log1p(np.exp(-np.abs(z))))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class Params:
    """Scores ``s`` (length N) and log-discriminations ``alpha`` (length K)."""

    s: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=np.float64).reshape(-1)
        a = np.array(self.alpha, dtype=np.float64).reshape(-1)
        s.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "alpha", a)

    @property
    def gamma(self) -> np.ndarray:
        return np.exp(self.alpha)

    @property
    def n_candidates(self) -> int:
        return len(self.s)

    @property
    def n_judges(self) -> int:
        return len(self.alpha)

    @property
    def theta(self) -> np.ndarray:
        """Stacked ``(s, alpha)`` vector of length N + K."""
        return np.concatenate([self.s, self.alpha])

    @classmethod
    def from_theta(cls, theta, n_candidates) -> "Params":
        theta = np.asarray(theta, dtype=np.float64)
        return cls(theta[:n_candidates], theta[n_candidates:])

    def is_normalized(self, tol=NORMALIZATION_TOL) -> bool:
        def ok(x):
            return len(x) == 0 or abs(x.sum()) <= tol * max(1.0, float(np.abs(x).sum()))
        return ok(self.s) and ok(self.alpha)

    def to_dict(self) -> dict:
        return {"s": self.s.tolist(), "alpha": self.alpha.tolist(), "gamma": self.gamma.tolist()}

    @classmethod
    def from_dict(cls, obj) -> "Params":
        """Inverse of :meth:`to_dict`; ``alpha`` takes precedence over ``gamma``."""
        if "alpha" in obj:
            alpha = obj["alpha"]
        elif "gamma" in obj:
            gamma = np.asarray(obj["gamma"], dtype=np.float64)
            if np.any(gamma <= 0):
                raise ValueError("gamma entries must be positive")
            alpha = np.log(gamma)
        else:
            raise ValueError("params need 'alpha' or 'gamma'")
        return cls(obj["s"], alpha)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text) -> "Params":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class Design:
    """Triple sampling law: ``uniform`` over all (pair, judge) or ``empirical`` n/T."""

    n_candidates: int
    n_judges: int
    kind: str
    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    pi: np.ndarray

    @classmethod
    def uniform(cls, n_candidates, n_judges) -> "Design":
        N, K = int(n_candidates), int(n_judges)
        a, b = np.triu_indices(N, k=1)
        i = np.repeat(a, K)
        j = np.repeat(b, K)
        k = np.tile(np.arange(K), len(a))
        pi = np.full(len(i), 2.0 / (K * N * (N - 1)))
        return cls(N, K, "uniform", i, j, k, pi)

    @classmethod
    def empirical(cls, triples: TripleTable) -> "Design":
        pi = triples.n / triples.total
        return cls(triples.n_candidates, triples.n_judges, "empirical",
                   np.asarray(triples.i), np.asarray(triples.j), np.asarray(triples.k), pi)

    @classmethod
    def from_name(cls, kind, triples: TripleTable) -> "Design":
        if kind == "uniform":
            return cls.uniform(triples.n_candidates, triples.n_judges)
        if kind == "empirical":
            return cls.empirical(triples)
        raise ValueError(f"unknown design {kind!r}")


def _check_finite(params: Params):
    if not (np.all(np.isfinite(params.s)) and np.all(np.isfinite(params.alpha))):
        raise ValueError("parameters must be finite")


def _check_index(params: Params, i, j, k):
    N, K = params.n_candidates, params.n_judges
    if not (0 <= i < N and 0 <= j < N):
        raise IndexError(f"candidate index out of range [0, {N})")
    if not 0 <= k < K:
        raise IndexError(f"judge index out of range [0, {K})")


def predict_prob(params: Params, i: int, j: int, k: int) -> float:
    """Probability that judge ``k`` prefers candidate ``i`` over ``j``."""
    _check_index(params, i, j, k)
    return sigmoid(params.gamma[k] * (params.s[i] - params.s[j]))


def log_likelihood(params: Params, triples: TripleTable, kernels=None) -> float:
    """Aggregated log-likelihood, dropping the design constant."""
    _check_finite(params)
    if len(triples) == 0:
        return 0.0
    kernels = kernels or _backend.kernels
    return float(kernels.loglik(triples.i, triples.j, triples.k, triples.counts,
                                triples.y_bar, params.s, params.alpha))


def grad_log_likelihood(params: Params, triples: TripleTable, kernels=None) -> np.ndarray:
    """Unconstrained gradient in ``(s, alpha)`` coordinates, length N + K."""
    _check_finite(params)
    if len(triples) == 0:
        return np.zeros(params.n_candidates + params.n_judges)
    kernels = kernels or _backend.kernels
    return kernels.grad(triples.i, triples.j, triples.k, triples.counts, triples.y_bar,
                        params.s, params.alpha)


def project_to_constraints(params: Params) -> Params:
    """Euclidean projection onto ``sum(s) = 0``, ``sum(alpha) = 0``."""
    _check_finite(params)
    s, a = params.s, params.alpha
    return Params(s - s.mean() if len(s) else s, a - a.mean() if len(a) else a)


def gauge_transform(params: Params, a: float, b: float):
    """Map to ``(a*s + b, gamma/a)``, which induces the same comparison probabilities.

    Returns the raw ``(s, gamma)`` pair; it is generally not normalized.
    """
    if a == 0 or not math.isfinite(a):
        raise ValueError("gauge scale a must be finite and nonzero")
    return a * params.s + b, params.gamma / a
