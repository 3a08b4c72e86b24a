"""Synthetic data from the judge-aware model and the simulation studies.

Every study is a pure function of its configuration: each replicate draws
from its own Philox stream keyed by ``(seed, config index, ...)``, so results
do not depend on thread scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend
from .data import Dataset, TripleTable, aggregate, check_connectivity
from .errors import AssumptionViolation, ConfigError, RankDeficiencyError
from .estimator import FitConfig, StopReason, fit_unweighted, fit_weighted
from .inference import component_intervals, covariance, normal_quantile
from .model import Design, Params, sigmoid

MAX_REDRAWS = 20


def stream(seed, *keys) -> np.random.Generator:
    """Counter-based generator for the stream identified by ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(seed)


@dataclass(frozen=True)
class TruthSpec:
    n_candidates: int
    n_judges: int
    score_law: str = "normal"
    score_scale: float = 1.0
    gamma_law: str = "loguniform"
    log_gamma_halfwidth: float = math.log(3.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_candidates < 2 or self.n_judges < 1:
            raise ConfigError("truth needs N >= 2 and K >= 1")
        if self.score_law not in ("normal", "uniform"):
            raise ConfigError(f"unknown score_law {self.score_law!r}")
        if self.gamma_law not in ("loguniform", "homogeneous"):
            raise ConfigError(f"unknown gamma_law {self.gamma_law!r}")


def gen_truth(spec: TruthSpec, rng=None) -> Params:
    """Draw normalized ``(s0, alpha0)``; scores are centered, log-gammas centered.

    ``rng`` overrides ``spec.seed`` when given.
    """
    if spec.score_scale <= 0:
        raise AssumptionViolation("score law has zero spread; all scores would be equal")
    rng = _rng(spec.seed if rng is None else rng)
    N, K = spec.n_candidates, spec.n_judges
    while True:
        if spec.score_law == "normal":
            s = rng.normal(0.0, spec.score_scale, N)
        else:
            s = rng.uniform(-spec.score_scale, spec.score_scale, N)
        if np.ptp(s) > 0:
            break
    if spec.gamma_law == "loguniform":
        h = spec.log_gamma_halfwidth
        a = rng.uniform(-h, h, K)
    else:
        a = np.zeros(K)
    return Params(s - s.mean(), a - a.mean())


def _uniform_triple(rng, N, K, T):
    a, b = np.triu_indices(N, k=1)
    p = rng.integers(0, len(a), T)
    k = rng.integers(0, K, T)
    return a[p], b[p], k


def simulate_comparisons(truth: Params, T: int, seed=0) -> Dataset:
    """T i.i.d. binary verdicts on uniformly drawn (pair, judge) triples."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    rng = _rng(seed)
    N, K = truth.n_candidates, truth.n_judges
    i, j, k = _uniform_triple(rng, N, K, int(T))
    p = sigmoid(truth.gamma[k] * (truth.s[i] - truth.s[j]))
    y = (rng.random(int(T)) < p).astype(np.float64)
    return Dataset.from_arrays(i, j, k, y, N, K)


def simulate_triples(truth: Params, T: int, seed=0) -> TripleTable:
    """Aggregated counterpart of :func:`simulate_comparisons`.

    Draws the triple counts as Multinomial(T, uniform) and the wins per
    triple as Binomial(n, p), which has the same law as aggregating T i.i.d.
    records but costs O(#triples) instead of O(T).
    """
    rng = _rng(seed)
    design = Design.uniform(truth.n_candidates, truth.n_judges)
    n = rng.multinomial(int(T), design.pi / design.pi.sum())
    p = sigmoid(truth.gamma[design.k] * (truth.s[design.i] - truth.s[design.j]))
    wins = rng.binomial(n, p)
    keep = n > 0
    return TripleTable.from_arrays(design.i[keep], design.j[keep], design.k[keep], n[keep],
                                   wins[keep] / n[keep], truth.n_candidates, truth.n_judges)


@dataclass(frozen=True)
class StudyConfig:
    configs: tuple[tuple[int, int], ...]
    t_grid: tuple[int, ...]
    replications: int
    seed: int
    level: float = 0.95
    score_law: str = "normal"
    score_scale: float = 1.0
    gamma_law: str = "loguniform"
    log_gamma_halfwidth: float = math.log(3.0)
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if not self.configs:
            raise ConfigError("configs: at least one (N, K) pair is required")
        for q, (N, K) in enumerate(self.configs):
            if N < 2 or K < 1:
                raise ConfigError(f"configs[{q}]: need N >= 2 and K >= 1, got ({N}, {K})")
        if not self.t_grid or any(b <= a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise ConfigError("t_grid: must be nonempty and strictly increasing")
        if self.t_grid[0] < 1:
            raise ConfigError("t_grid[0]: sample sizes must be >= 1")
        if self.replications < 1:
            raise ConfigError("replications: must be >= 1")
        if not 0 < self.level < 1:
            raise ConfigError("level: must lie in (0, 1)")

    @classmethod
    def from_dict(cls, obj) -> "StudyConfig":
        obj = dict(obj)
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown fields {sorted(extra)}")
        for req in ("configs", "t_grid", "replications", "seed"):
            if req not in obj:
                raise ConfigError(f"{req}: required field missing")
        try:
            configs = tuple((int(n), int(k)) for n, k in obj.pop("configs"))
        except (TypeError, ValueError):
            raise ConfigError("configs: expected a list of [N, K] pairs") from None
        try:
            t_grid = tuple(int(round(float(t))) for t in obj.pop("t_grid"))
        except (TypeError, ValueError):
            raise ConfigError("t_grid: expected a list of numbers") from None
        fit = FitConfig.from_dict(obj.pop("fit", {}), path="fit")
        return cls(configs=configs, t_grid=t_grid, fit=fit, **obj)

    def truth_spec(self, index) -> TruthSpec:
        N, K = self.configs[index]
        return TruthSpec(N, K, self.score_law, self.score_scale, self.gamma_law,
                         self.log_gamma_halfwidth, seed=0)

    def truth(self, index) -> Params:
        return gen_truth(self.truth_spec(index), rng=stream(self.seed, index))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["configs"] = [list(c) for c in self.configs]
        d["t_grid"] = list(self.t_grid)
        return d


def log_grid(lo_exp, hi_exp, points) -> tuple[int, ...]:
    """Integer sample sizes at ``points`` log-spaced exponents of ten."""
    return tuple(int(round(10.0 ** e)) for e in np.linspace(lo_exp, hi_exp, points))


def _map(fn, tasks, threads):
    threads = threads or os.cpu_count() or 1
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


@dataclass
class StudyResult:
    rows: list[dict]
    summary: list[dict]
    metadata: dict
    detail: list[dict] = field(default_factory=list)


def _slope(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.polyfit(x, y, 1)[0])


def run_mse_study(config: StudyConfig, threads=None, slope_points=5) -> StudyResult:
    """MSE of scores and log-discriminations against T, with log-log slopes."""
    if len(config.t_grid) < slope_points:
        raise ConfigError(f"t_grid: slope fitting needs >= {slope_points} points")
    truths = [config.truth(c) for c in range(len(config.configs))]
    tasks = [(c, t_idx, rep) for c in range(len(config.configs))
             for t_idx in range(len(config.t_grid)) for rep in range(config.replications)]

    def one(task):
        c, t_idx, rep = task
        truth = truths[c]
        T = config.t_grid[t_idx]
        triples = simulate_triples(truth, T, stream(config.seed, c, t_idx, rep))
        N, K = config.configs[c]
        try:
            res = fit_weighted(triples, N, K, config.fit)
        except ValueError as exc:  # disconnected design at very small T
            return dict(N=N, K=K, T=T, replicate=rep, mse_s=math.nan, mse_gamma_log=math.nan,
                        converged=False, stop_reason=type(exc).__name__, iterations=0)
        return dict(
            N=N, K=K, T=T, replicate=rep,
            mse_s=float(np.mean((res.params.s - truth.s) ** 2)),
            mse_gamma_log=float(np.mean((res.params.alpha - truth.alpha) ** 2)),
            converged=res.converged, stop_reason=res.stop_reason.value,
            iterations=res.iterations)

    rows = _map(one, tasks, threads)
    summary = []
    excluded = {}
    for c, (N, K) in enumerate(config.configs):
        mine = [r for r in rows if r["N"] == N and r["K"] == K]
        excluded[f"{N}x{K}"] = sum(not r["converged"] for r in mine)
        xs, means = [], {"mse_s": [], "mse_gamma_log": []}
        log_of_mean = {"mse_s": [], "mse_gamma_log": []}
        for T in config.t_grid:
            ok = [r for r in mine if r["T"] == T and r["converged"]]
            if not ok:
                continue
            xs.append(math.log(T))
            for m in means:
                vals = np.array([r[m] for r in ok])
                means[m].append(float(np.mean(np.log(vals))))
                log_of_mean[m].append(float(np.log(np.mean(vals))))
                summary.append(dict(N=N, K=K, T=T, metric=m, kind="point",
                                    mean_log_mse=means[m][-1], log_mean_mse=log_of_mean[m][-1],
                                    median_mse=float(np.median(vals)), n_used=len(ok)))
        for m in means:
            if len(xs) >= slope_points:
                slope = _slope(xs[-slope_points:], means[m][-slope_points:])
                slope_lm = _slope(xs[-slope_points:], log_of_mean[m][-slope_points:])
            else:
                slope = slope_lm = math.nan
            summary.append(dict(N=N, K=K, T=0, metric=m, kind="slope",
                                mean_log_mse=slope, log_mean_mse=slope_lm,
                                median_mse=math.nan, n_used=min(len(xs), slope_points)))
    meta = _metadata("mse-study", config, excluded)
    meta["slope_regression"] = ("OLS of log(mean MSE over replicates) on log T over the last "
                                f"{slope_points} grid points (log_mean_mse); the replicate "
                                "mean of log MSE is also reported (mean_log_mse)")
    meta["truths"] = [t.to_dict() for t in truths]
    return StudyResult(rows, summary, meta)


def slopes(result: StudyResult, variant="log_mean_mse") -> dict:
    """``{(N, K, metric): slope}`` from an MSE study.

    ``variant`` is ``"log_mean_mse"`` (log of the replicate mean, the default)
    or ``"mean_log_mse"`` (replicate mean of the log).
    """
    if variant not in ("log_mean_mse", "mean_log_mse"):
        raise ValueError(f"unknown slope variant {variant!r}")
    return {(r["N"], r["K"], r["metric"]): r[variant]
            for r in result.summary if r["kind"] == "slope"}


def _score_intervals(res, weighted, T, level):
    params = res.params
    design = Design.uniform(params.n_candidates, params.n_judges)
    if not weighted:
        params = Params(params.s, np.zeros(params.n_judges))
    cov = covariance(params, design, weighted=weighted)
    return component_intervals(res, cov, T, level)


def run_coverage_study(config: StudyConfig, threads=None) -> StudyResult:
    """Wald coverage and width for the scores under both models."""
    truths = [config.truth(c) for c in range(len(config.configs))]
    tasks = [(c, t_idx, rep) for c in range(len(config.configs))
             for t_idx in range(len(config.t_grid)) for rep in range(config.replications)]

    def one(task):
        c, t_idx, rep = task
        truth = truths[c]
        N, K = config.configs[c]
        T = config.t_grid[t_idx]
        triples = simulate_triples(truth, T, stream(config.seed, c, t_idx, rep))
        out = {}
        for model, fitter, weighted in (("weighted", fit_weighted, True),
                                        ("unweighted", fit_unweighted, False)):
            try:
                res = fitter(triples, config=config.fit)
                if not res.converged:
                    out[model] = None
                    continue
                cis = _score_intervals(res, weighted, T, config.level)
            except (ValueError, RankDeficiencyError):
                out[model] = None
                continue
            out[model] = ([ci.covers(truth.s[q]) for q, ci in enumerate(cis)],
                          [ci.width for ci in cis])
        return out

    results = _map(one, tasks, threads)
    rows, detail = [], []
    excluded = {}
    for c, (N, K) in enumerate(config.configs):
        for t_idx, T in enumerate(config.t_grid):
            cell = [results[q] for q, (cc, tt, _) in enumerate(tasks) if cc == c and tt == t_idx]
            for model in ("weighted", "unweighted"):
                ok = [r[model] for r in cell if r[model] is not None]
                excluded[f"{N}x{K}/T={T}/{model}"] = len(cell) - len(ok)
                if ok:
                    cover = np.array([cv for cv, _ in ok], dtype=np.float64)
                    width = np.array([w for _, w in ok], dtype=np.float64)
                    cov_s, w_s = float(cover.mean()), float(width.mean())
                else:
                    cover = width = None
                    cov_s = w_s = math.nan
                rows.append(dict(N=N, K=K, T=T, model=model, coverage_s=cov_s,
                                 avg_width_s=w_s, n_used=len(ok), n_excluded=len(cell) - len(ok)))
                for q in range(N):
                    detail.append(dict(N=N, K=K, T=T, model=model, i=q,
                                       coverage=float(cover[:, q].mean()) if ok else math.nan,
                                       avg_width=float(width[:, q].mean()) if ok else math.nan))
    meta = _metadata("coverage-study", config, excluded)
    meta["z"] = normal_quantile(0.5 + config.level / 2)
    meta["design"] = "uniform"
    meta["truths"] = [t.to_dict() for t in truths]
    return StudyResult(rows, rows, meta, detail)


def _metadata(command, config, excluded):
    return {
        "command": command,
        "config": config.to_dict(),
        "seed": config.seed,
        "rng": "Philox keyed by SeedSequence([seed, config_index, t_index, replicate])",
        "excluded": excluded,
        "backend": _backend.BACKEND,
    }


def _compact_judges(triples: TripleTable) -> TripleTable:
    present = np.unique(triples.k)
    if len(present) == triples.n_judges:
        return triples
    remap = np.full(triples.n_judges, -1, dtype=np.int64)
    remap[present] = np.arange(len(present))
    return TripleTable.from_arrays(triples.i, triples.j, remap[triples.k], triples.n,
                                   triples.y_bar, triples.n_candidates, len(present))


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0 else math.nan


def run_subsample_study(dataset: Dataset, k_grid, t_grid, reps=5, seed=0,
                        fit_config: FitConfig | None = None, threads=None) -> StudyResult:
    """Agreement of subsampled fits with each model's own full-data fit.

    For each judge budget and repetition one judge subset is drawn; the
    comparison subsets for increasing T are nested prefixes of one random
    permutation of that subset's records.
    """
    fit_config = fit_config or FitConfig()
    k_grid = [int(k) for k in k_grid]
    t_grid = [int(t) for t in t_grid]
    if any(k < 1 or k > dataset.n_judges for k in k_grid):
        raise ConfigError(f"k_grid: judge budgets must lie in [1, {dataset.n_judges}]")
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ConfigError("t_grid: must be strictly increasing")
    full = aggregate(dataset)
    ref = {"weighted": fit_weighted(full, config=fit_config).params.s,
           "unweighted": fit_unweighted(full, config=fit_config).params.s}

    tasks = [(kq, rep) for kq in range(len(k_grid)) for rep in range(reps)]

    def one(task):
        kq, rep = task
        rng = stream(seed, kq, rep)
        judges = np.sort(rng.choice(dataset.n_judges, k_grid[kq], replace=False))
        sub = dataset.restrict_judges(judges)
        perm = rng.permutation(len(sub))
        cells = []
        for T in t_grid:
            if T > len(sub):
                cells.append(("infeasible", None))
                continue
            idx = perm[:T]
            triples = aggregate(sub.subset(np.sort(idx)))
            tries = 0
            while not check_connectivity(triples).connected and tries < MAX_REDRAWS:
                tries += 1
                idx = rng.choice(len(sub), T, replace=False)
                triples = aggregate(sub.subset(np.sort(idx)))
            if not check_connectivity(triples).connected:
                cells.append(("disconnected", None))
                continue
            triples = _compact_judges(triples)
            corr = {}
            for model, fitter in (("weighted", fit_weighted), ("unweighted", fit_unweighted)):
                res = fitter(triples, config=fit_config)
                # a separation-flagged iterate is finite and Pearson ignores its scale
                usable = res.converged or res.stop_reason is StopReason.SEPARATION
                corr[model] = (_pearson(res.params.s, ref[model]), usable, res.converged)
            cells.append(("ok" if tries == 0 else "redrawn", corr))
        return cells

    results = _map(one, tasks, threads)
    rows = []
    flags = {}
    for kq, K in enumerate(k_grid):
        for tq, T in enumerate(t_grid):
            cell = [results[q][tq] for q, (kk, _) in enumerate(tasks) if kk == kq]
            statuses = [st for st, _ in cell]
            flags[f"K={K}/T={T}"] = {s: statuses.count(s) for s in sorted(set(statuses))}
            for model in ("weighted", "unweighted"):
                fits = [c[model] for _, c in cell if c is not None]
                vals = [f[0] for f in fits if f[1]]
                status = "infeasible" if all(s == "infeasible" for s in statuses) else (
                    "ok" if vals else "skipped")
                rows.append(dict(K=K, T=T, model=model,
                                 mean_correlation=float(np.mean(vals)) if vals else math.nan,
                                 n_valid=len(vals), n_flagged=sum(not f[2] for f in fits),
                                 status=status))
    meta = {
        "command": "subsample-study",
        "k_grid": k_grid, "t_grid": t_grid, "reps": reps, "seed": seed,
        "fit": asdict(fit_config),
        "n_records": len(dataset), "n_candidates": dataset.n_candidates,
        "n_judges": dataset.n_judges,
        "cell_status": flags,
        "backend": _backend.BACKEND,
    }
    return StudyResult(rows, rows, meta)
