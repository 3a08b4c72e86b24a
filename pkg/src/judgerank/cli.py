"""``judgerank`` command-line interface.

Exit codes: 0 success, 1 I/O or parse error, 2 disconnected comparison
graph, 3 a fit stopped without converging.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import TripleTable, aggregate, check_connectivity, load_records, write_records
from .errors import ConfigError, DisconnectedGraphError, JudgeRankError
from .estimator import FitConfig, FitResult, fit_unweighted, fit_weighted
from .inference import ci_table, covariance, rank_agreement, ranks_descending, write_ci_csv
from .model import Design, Params
from .simulator import (StudyConfig, TruthSpec, gen_truth, log_grid, run_coverage_study,
                        run_mse_study, run_subsample_study, simulate_comparisons)

EXIT_OK, EXIT_IO, EXIT_DISCONNECTED, EXIT_NONCONVERGED = 0, 1, 2, 3

logger = logging.getLogger("judgerank")

DEFAULT_STUDIES = {
    "mse-study": {"configs": [[10, 5]], "t_grid": list(log_grid(3, 6, 7)), "replications": 50},
    "coverage-study": {"configs": [[10, 5]], "t_grid": [1000, 10000, 100000],
                       "replications": 300},
    "subsample-study": {"k_grid": [4, 8, 12, 16], "t_grid": [500, 1000, 2000, 5000, 10000],
                        "reps": 5,
                        "synthetic": {"n_candidates": 45, "n_judges": 18, "T": 100000}},
}


def _setup_logging():
    level = os.environ.get("JUDGERANK_LOG", "warn").strip().lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_rows(path, rows, columns=None):
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _manifest(args, command, inputs, config=None):
    return {
        "command": command,
        "inputs": inputs,
        "out": str(args.out) if getattr(args, "out", None) else None,
        "config": config,
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "argv": [a for a in getattr(args, "_argv", [])],
    }


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fit_config(args):
    kw = {}
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "max_iters", None) is not None:
        kw["max_iters"] = args.max_iters
    if getattr(args, "learning_rate", None) is not None:
        kw["learning_rate"] = args.learning_rate
    return FitConfig(**kw)


def _names(names, n, prefix):
    return list(names) if names else [f"{prefix}{q}" for q in range(n)]


def cmd_fit(args):
    path = Path(args.input)
    with open(path, "rb") as fh:
        dataset = load_records(fh, args.format)
    report = check_connectivity(dataset)
    if not report.connected:
        print(report.describe(dataset.candidate_names), file=sys.stderr)
        return EXIT_DISCONNECTED
    out = _out_dir(args)
    triples = aggregate(dataset)
    config = _fit_config(args)
    cand = _names(dataset.candidate_names, dataset.n_candidates, "m")
    judges = _names(dataset.judge_names, dataset.n_judges, "j")
    models = ["weighted", "unweighted"] if args.both else (
        ["unweighted"] if args.unweighted else ["weighted"])
    with open(out / "triples.csv", "w", newline="", encoding="utf-8") as fh:
        triples.to_csv(fh)
    status = EXIT_OK
    for model in models:
        res = (fit_weighted if model == "weighted" else fit_unweighted)(triples, config=config)
        if not res.converged:
            logger.warning("%s fit stopped without converging (%s)", model, res.stop_reason.value)
            status = EXIT_NONCONVERGED
        art = res.to_dict()
        art["candidate_names"] = cand
        art["judge_names"] = judges
        write_json(out / f"fit_{model}.json", art)
        write_json(out / f"params_{model}.json", res.params.to_dict())
        pos = ranks_descending(res.params.s)
        order = np.argsort(pos)
        write_rows(out / f"leaderboard_{model}.csv",
                   [dict(rank=int(pos[q]), name=cand[q], s_hat=float(res.params.s[q]))
                    for q in order])
        write_rows(out / f"judges_{model}.csv",
                   [dict(judge=judges[q], gamma_hat=float(res.params.gamma[q]),
                         alpha_hat=float(res.params.alpha[q])) for q in range(len(judges))])
        print(f"{model}: {res.stop_reason.value} after {res.iterations} iterations, "
              f"loglik {res.final_loglik:.6f}")
    write_json(out / "manifest.json", _manifest(args, "fit", [str(path)],
                                                {"fit": config.__dict__, "models": models}))
    return status


def _load_fit(fit_dir, model):
    path = Path(fit_dir) / f"fit_{model}.json"
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        art = json.load(fh)
    return FitResult.from_dict(art), art["candidate_names"], art["judge_names"]


def cmd_ci(args):
    fit_dir = Path(args.fit)
    with open(fit_dir / "triples.csv", encoding="utf-8") as fh:
        raw = TripleTable.from_csv(fh)
    found = False
    out = Path(args.out) if args.out else fit_dir
    out.mkdir(parents=True, exist_ok=True)
    for model in ("weighted", "unweighted"):
        loaded = _load_fit(fit_dir, model)
        if loaded is None:
            continue
        found = True
        res, cand, judges = loaded
        N, K = len(cand), len(judges)
        triples = TripleTable.from_arrays(raw.i, raw.j, raw.k, raw.n, raw.y_bar, N, K)
        if res.params.n_candidates != N or res.params.n_judges != K:
            raise ConfigError(f"fit_{model}.json roster does not match its parameters")
        index = {name: q for q, name in enumerate(cand)}
        diffs = []
        for a, b in args.diff or ():
            for name in (a, b):
                if name not in index:
                    raise ConfigError(f"--diff: unknown candidate {name!r}")
            diffs.append((index[a], index[b]))
        weighted = model == "weighted"
        params = res.params if weighted else Params(res.params.s, np.zeros(K))
        cov = covariance(params, Design.from_name(args.design, triples), weighted=weighted)
        rows = ci_table(res, cov, triples.total, args.level, cand, judges,
                        judges=args.judges and weighted, diffs=diffs)
        with open(out / f"ci_{model}.csv", "w", newline="", encoding="utf-8") as fh:
            write_ci_csv(rows, fh)
        print(f"# {model} model, T={triples.total}, level={args.level}, design={args.design}")
        for r in rows:
            print(f"{r['name']:>24s} {r['estimate']:+.4f} [{r['lower']:+.4f}, {r['upper']:+.4f}]"
                  f" se={r['se']:.4f}")
    if not found:
        raise FileNotFoundError(f"no fit_*.json artifacts in {fit_dir}")
    write_json(out / "ci_manifest.json",
               _manifest(args, "ci", [str(fit_dir)],
                         {"level": args.level, "design": args.design, "judges": args.judges,
                          "diff": args.diff or []}))
    return EXIT_OK


def cmd_simulate(args):
    out = _out_dir(args)
    spec = TruthSpec(args.n_candidates, args.n_judges, gamma_law=args.gamma_law, seed=args.seed)
    truth = gen_truth(spec)
    dataset = simulate_comparisons(truth, args.T, seed=args.seed + 1)
    with open(out / "records.csv", "w", newline="", encoding="utf-8") as fh:
        write_records(dataset, fh)
    write_json(out / "truth.json", truth.to_dict())
    write_json(out / "manifest.json", _manifest(args, "simulate", [], spec.__dict__))
    print(f"wrote {len(dataset)} records for N={truth.n_candidates}, K={truth.n_judges}")
    return EXIT_OK


def _study_config(args, kind):
    obj = dict(DEFAULT_STUDIES[kind])
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise ConfigError("config: expected a JSON object")
        obj.update(user)
    obj["seed"] = args.seed
    return obj


def _write_study(out, name, result, manifest):
    write_rows(out / f"{name}_rows.csv", result.rows)
    if result.summary is not result.rows:
        write_rows(out / f"{name}_summary.csv", result.summary)
    if result.detail:
        write_rows(out / f"{name}_detail.csv", result.detail)
    meta = dict(result.metadata)
    meta["manifest"] = manifest
    write_json(out / "metadata.json", meta)


def cmd_mse_study(args):
    obj = _study_config(args, "mse-study")
    config = StudyConfig.from_dict(obj)
    out = _out_dir(args)
    result = run_mse_study(config, threads=args.threads)
    _write_study(out, "mse", result, _manifest(args, "mse-study", [args.config], obj))
    parts = [f"N={r['N']} K={r['K']} {r['metric']} slope={r['log_mean_mse']:.3f} "
             f"(mean-of-log {r['mean_log_mse']:.3f})"
             for r in result.summary if r["kind"] == "slope"]
    print("mse-study slopes: " + "; ".join(parts))
    return EXIT_OK


def cmd_coverage_study(args):
    obj = _study_config(args, "coverage-study")
    config = StudyConfig.from_dict(obj)
    out = _out_dir(args)
    result = run_coverage_study(config, threads=args.threads)
    _write_study(out, "coverage", result, _manifest(args, "coverage-study", [args.config], obj))
    parts = [f"N={r['N']} K={r['K']} T={r['T']} {r['model']} cov={r['coverage_s']:.3f} "
             f"width={r['avg_width_s']:.4f}" for r in result.rows]
    print("coverage-study: " + "; ".join(parts))
    return EXIT_OK


def cmd_subsample_study(args):
    obj = _study_config(args, "subsample-study")
    allowed = {"k_grid", "t_grid", "reps", "synthetic", "fit", "seed"}
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown fields {sorted(extra)}")
    fit_config = FitConfig.from_dict(obj.get("fit", {}), path="fit")
    if args.input:
        with open(args.input, "rb") as fh:
            dataset = load_records(fh, args.format)
        inputs = [args.input]
    else:
        syn = obj["synthetic"]
        try:
            spec = TruthSpec(int(syn["n_candidates"]), int(syn["n_judges"]),
                             gamma_law=syn.get("gamma_law", "loguniform"), seed=args.seed)
            T = int(syn["T"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"synthetic: {exc}") from None
        dataset = simulate_comparisons(gen_truth(spec), T, seed=args.seed + 1)
        inputs = []
    report = check_connectivity(dataset)
    if not report.connected:
        print(report.describe(dataset.candidate_names), file=sys.stderr)
        return EXIT_DISCONNECTED
    out = _out_dir(args)
    result = run_subsample_study(dataset, obj["k_grid"], obj["t_grid"], int(obj["reps"]),
                                 args.seed, fit_config, threads=args.threads)
    _write_study(out, "subsample", result, _manifest(args, "subsample-study", inputs, obj))
    parts = []
    for K in obj["k_grid"]:
        cells = [r for r in result.rows if r["K"] == K]
        w = [r["mean_correlation"] for r in cells if r["model"] == "weighted"]
        u = [r["mean_correlation"] for r in cells if r["model"] == "unweighted"]
        wins = sum(a >= b for a, b in zip(w, u) if not (math.isnan(a) or math.isnan(b)))
        parts.append(f"K={K} weighted>=unweighted in {wins}/{len(w)} cells")
    print("subsample-study: " + "; ".join(parts))
    return EXIT_OK


def _read_scores(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        score_col = next((c for c in ("s_hat", "score", "estimate") if c in cols), None)
        if "name" not in cols or score_col is None:
            raise ConfigError(f"{path}: needs a 'name' column and one of s_hat/score/estimate")
        scores = {}
        for line, row in enumerate(reader, start=2):
            try:
                scores[row["name"]] = float(row[score_col])
            except (TypeError, ValueError):
                raise ConfigError(f"{path}: line {line}: bad score {row[score_col]!r}") from None
    return scores


def cmd_compare(args):
    a = _read_scores(args.scores_a)
    b = _read_scores(args.scores_b)
    common = [n for n in a if n in b]
    if len(common) < 2:
        raise ConfigError(f"rosters share {len(common)} models; need at least 2")
    x = np.array([a[n] for n in common])
    y = np.array([b[n] for n in common])
    agree = rank_agreement(x, y)
    ra, rb = ranks_descending(x), ranks_descending(y)
    rows = [dict(name=n, rank_a=int(ra[q]), rank_b=int(rb[q]), delta=int(ra[q] - rb[q]))
            for q, n in enumerate(common)]
    rows.sort(key=lambda r: (r["rank_a"], r["name"]))
    print(f"models in common: {len(common)}")
    print(f"spearman {agree.spearman:.4f}  pearson {agree.pearson:.4f}  "
          f"kendall {agree.kendall:.4f}")
    for r in rows:
        if r["delta"]:
            print(f"  {r['name']} moves from rank {r['rank_a']} to rank {r['rank_b']}")
    if args.out:
        out = _out_dir(args)
        write_rows(out / "rank_movement.csv", rows, ["name", "rank_a", "rank_b", "delta"])
        write_json(out / "agreement.json", {
            "n_common": len(common), "spearman": agree.spearman, "pearson": agree.pearson,
            "kendall": agree.kendall,
            "manifest": _manifest(args, "compare", [args.scores_a, args.scores_b])})
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="judgerank", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"judgerank {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_required=False, threads=False):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, required=seed_required,
                        default=None if seed_required else 0)
        if threads:
            sp.add_argument("--threads", type=int, default=None,
                            help="worker cap (default: available cores)")

    f = sub.add_parser("fit", help="fit weighted and/or unweighted models to a records file")
    f.add_argument("--input", required=True)
    f.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    g = f.add_mutually_exclusive_group()
    g.add_argument("--both", action="store_true", help="fit weighted and unweighted models")
    g.add_argument("--unweighted", action="store_true", help="fit only the unweighted model")
    f.add_argument("--max-iters", type=int, default=None)
    f.add_argument("--learning-rate", type=float, default=None)
    common(f)
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("ci", help="Wald confidence intervals from fit artifacts")
    c.add_argument("--fit", required=True, help="directory written by `judgerank fit`")
    c.add_argument("--level", type=float, default=0.95)
    c.add_argument("--diff", nargs=2, action="append", metavar=("A", "B"),
                   help="interval for s_A - s_B (repeatable)")
    c.add_argument("--judges", action="store_true", help="also report log-gamma intervals")
    c.add_argument("--design", choices=["empirical", "uniform"], default="empirical")
    c.add_argument("--out", default=None, help="output directory (default: the fit directory)")
    c.set_defaults(func=cmd_ci)

    s = sub.add_parser("simulate", help="write synthetic records from a random truth")
    s.add_argument("--n-candidates", type=int, required=True)
    s.add_argument("--n-judges", type=int, required=True)
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--gamma-law", choices=["loguniform", "homogeneous"], default="loguniform")
    common(s, seed_required=True)
    s.set_defaults(func=cmd_simulate)

    for name, func in (("mse-study", cmd_mse_study), ("coverage-study", cmd_coverage_study),
                       ("subsample-study", cmd_subsample_study)):
        st = sub.add_parser(name, help=f"run the {name.replace('-', ' ')}")
        st.add_argument("--config", default=None, help="JSON study config (defaults: desk scale)")
        if name == "subsample-study":
            st.add_argument("--input", default=None, help="records file (default: synthetic)")
            st.add_argument("--format", choices=["csv", "jsonl"], default="csv")
        common(st, seed_required=True, threads=True)
        st.set_defaults(func=func)

    cp = sub.add_parser("compare", help="rank agreement between two score files")
    cp.add_argument("scores_a")
    cp.add_argument("scores_b")
    cp.add_argument("--out", default=None)
    cp.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    _setup_logging()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args._argv = argv
    try:
        return args.func(args)
    except DisconnectedGraphError as exc:
        print(exc.report.describe(), file=sys.stderr)
        return EXIT_DISCONNECTED
    except (OSError, JudgeRankError, ValueError, KeyError) as exc:
        print(f"judgerank: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
