"""Command-line entry point wiring JSON configs to the pipelines.

Subcommands: ``estimate`` (fit one data matrix), ``simulate`` (run the
seeded experiment grid), ``forecast`` (conditional-mean forecasting), and
``project-selftest`` (quick internal consistency checks).  Option
precedence is flags > config file > defaults; every output JSON embeds the
resolved configuration, and outputs are byte-identical across repeated runs
with the same config and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cholesky import save_dense_csv, to_json_dict
from .estimators import BlockPenalizedPrecision
from .forecast import ForecastSplit, run_callcenter, transform_counts
from .simulation import ExperimentPlan, run_experiment, write_results


class CliError(Exception):
    """Validation or parse failure surfaced as a nonzero exit."""


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _dump_json(doc, path):
    with open(path, "w") as fh:
        json.dump(_to_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_csv_matrix(path):
    """Comma-separated numeric matrix; a non-numeric first row is treated
    as a header.  Malformed cells report their row and column."""
    rows = []
    try:
        with open(path) as fh:
            lines = [line.strip() for line in fh if line.strip()]
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    if not lines:
        raise CliError(f"{path}: empty CSV file")
    start = 0
    try:
        [float(tok) for tok in lines[0].split(",")]
    except ValueError:
        start = 1
    width = None
    for i, line in enumerate(lines[start:], start=start + 1):
        toks = line.split(",")
        if width is None:
            width = len(toks)
        elif len(toks) != width:
            raise CliError(f"{path}: row {i} has {len(toks)} columns, "
                           f"expected {width}")
        row = []
        for j, tok in enumerate(toks, start=1):
            try:
                row.append(float(tok))
            except ValueError:
                raise CliError(f"{path}: cannot parse value at row {i}, "
                               f"column {j}: {tok!r}") from None
        rows.append(row)
    return np.asarray(rows, dtype=float)


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise CliError(f"config file {path} must hold a JSON object")
    return doc


def _resolve(defaults, config, flags):
    """Layer the three option sources; unknown config keys are rejected."""
    out = dict(defaults)
    for key, val in config.items():
        if key not in defaults:
            raise CliError(f"unknown config field: {key}")
        out[key] = val
    for key, val in flags.items():
        if val is not None:
            out[key] = val
    return out


def _apply_threads(threads):
    if threads is None:
        threads = int(os.environ.get("BANDPREC_THREADS", "0"))
    if threads and threads > 0:
        try:
            from threadpoolctl import threadpool_limits
            threadpool_limits(limits=threads)
        except ImportError:
            pass
    return threads


def _require(cfg, fields):
    missing = [f for f in fields if cfg.get(f) in (None, "")]
    if missing:
        raise CliError("missing required configuration fields: "
                       + ", ".join(missing))


ESTIMATE_DEFAULTS = {
    "data": None, "out": "bandprec-out", "seed": 0, "threads": None,
    "runs": None,
    "gamma": 0.9, "continue_beyond_window": False,
    "smoothing_bandwidth": 0.3, "min_smooth_length": 5,
    "a": 3.7, "conventional_scad": False, "lam": None, "lambda_grid": None,
    "s_n": None, "M": 0.0, "step": None, "max_outer": 1, "max_inner": 5000,
    "tol": 1e-6, "assume_centered": False,
}


def cmd_estimate(cfg):
    _require(cfg, ["data"])
    Y = read_csv_matrix(cfg["data"])
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    model = BlockPenalizedPrecision(
        lam=cfg["lam"], a=cfg["a"], conventional_scad=cfg["conventional_scad"],
        gamma=cfg["gamma"], continue_beyond_window=cfg["continue_beyond_window"],
        smoothing_bandwidth=cfg["smoothing_bandwidth"],
        min_smooth_length=cfg["min_smooth_length"], s_n=cfg["s_n"],
        M=cfg["M"], step=cfg["step"], max_outer=cfg["max_outer"],
        max_inner=cfg["max_inner"], tol=cfg["tol"],
        lambda_grid=cfg["lambda_grid"], assume_centered=cfg["assume_centered"],
    )
    model.fit(Y)
    _dump_json(to_json_dict(model.estimate_), outdir / "precision.json")
    rep = model.report_
    report = {
        "config": cfg,
        "version": __version__,
        "n": int(Y.shape[0]), "p": int(Y.shape[1]),
        "lambda": model.lambda_,
        "gcv": None if model.gcv_result_ is None else {
            "lambda_grid": model.gcv_result_.lambda_grid,
            "gcv_values": model.gcv_result_.gcv_values,
            "best_lambda": model.gcv_result_.best_lambda,
            "excluded_terms": model.gcv_result_.excluded_terms,
        },
        "solve": {
            "iterations_used": rep.iterations_used,
            "final_objective": rep.final_objective,
            "converged": rep.converged,
            "active_blocks": rep.active_blocks,
            "multiplier": rep.multiplier,
            "ln_violations": rep.ln_violations,
            "qn_path": rep.qn_path,
            "qn_violations": rep.qn_violations,
        },
        "location": model.location_,
        "sigma2": model.sigma2_,
    }
    _dump_json(report, outdir / "report.json")
    save_dense_csv(model.precision_, outdir / "omega.csv")
    return 0


SIMULATE_DEFAULTS = {
    "models": ["I", "II", "III"], "p_list": [50, 100], "n": 100,
    "laws": ["normal"], "runs": 50, "seed": 0,
    "methods": ["bp", "banding"], "bp_max_outer": 2,
    "banding_k_grid": list(range(11)), "banding_folds": 5,
    "out": "bandprec-out", "threads": None,
}


def cmd_simulate(cfg):
    try:
        plan = ExperimentPlan(
            models=tuple(cfg["models"]), p_list=tuple(cfg["p_list"]),
            n=int(cfg["n"]), laws=tuple(cfg["laws"]), runs=int(cfg["runs"]),
            base_seed=int(cfg["seed"]), methods=tuple(cfg["methods"]),
            bp_max_outer=int(cfg["bp_max_outer"]),
            banding_k_grid=tuple(cfg["banding_k_grid"]),
            banding_folds=int(cfg["banding_folds"]),
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    results = run_experiment(plan)
    results["config"] = cfg
    results["version"] = __version__
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path, _ = write_results(results, outdir)
    with open(csv_path) as fh:
        sys.stdout.write(fh.read())
    return 0


FORECAST_DEFAULTS = {
    "train": None, "test": None, "split": 51, "estimators": ["sample"],
    "k": 19, "h": 0.1, "counts": False, "out": "bandprec-out",
    "seed": 0, "threads": None, "runs": None,
}


def cmd_forecast(cfg):
    _require(cfg, ["train", "test"])
    train = read_csv_matrix(cfg["train"])
    test = read_csv_matrix(cfg["test"])
    if cfg["counts"]:
        train = transform_counts(train)
        test = transform_counts(test)
    split = ForecastSplit(p1=int(cfg["split"]))
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    summaries = {}
    for estimator in cfg["estimators"]:
        err, summary = run_callcenter(train, test, split, estimator=estimator,
                                      k=int(cfg["k"]), h=float(cfg["h"]))
        path = outdir / f"err_by_interval_{estimator}.csv"
        with open(path, "w") as fh:
            fh.write("interval,err\n")
            for j, e in enumerate(err, start=split.p1 + 1):
                fh.write(f"{j},{e!r}\n")
        summaries[estimator] = summary
    _dump_json({"config": cfg, "version": __version__,
                "summaries": summaries}, outdir / "summary.json")
    return 0


def cmd_selftest(cfg):
    from .selftest import run_selftest

    failures = run_selftest(verbose=True)
    return 1 if failures else 0


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--seed", type=int, help="base random seed")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--threads", type=int,
                     help="BLAS thread cap (0 = automatic); env fallback "
                          "BANDPREC_THREADS")
    sub.add_argument("--runs", type=int,
                     help="number of seeded runs (simulate only)")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="bandprec",
        description="Sparse precision matrices by block-penalized Cholesky "
                    "band regression.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    est = subs.add_parser("estimate", help="fit a CSV data matrix")
    _add_common(est)
    est.add_argument("--data", help="CSV data matrix, rows = observations")
    est.add_argument("--gamma", type=float)
    est.add_argument("--smoothing-bandwidth", dest="smoothing_bandwidth",
                     type=float)
    est.add_argument("--a", type=float, help="SCAD shape parameter")
    est.add_argument("--lam", type=float, help="fixed penalty level "
                     "(default: GCV-selected)")
    est.add_argument("--m", dest="M", type=float, help="constraint radius")
    est.add_argument("--max-outer", dest="max_outer", type=int)
    est.add_argument("--max-inner", dest="max_inner", type=int)
    est.add_argument("--tol", type=float)
    est.add_argument("--assume-centered", dest="assume_centered",
                     action="store_const", const=True)

    sim = subs.add_parser("simulate", help="run the seeded experiment grid")
    _add_common(sim)
    sim.add_argument("--models", type=lambda s: s.split(","),
                     help="comma-separated model names (I, II, III)")
    sim.add_argument("--p-list", dest="p_list",
                     type=lambda s: [int(x) for x in s.split(",")])
    sim.add_argument("--n", type=int)
    sim.add_argument("--laws", type=lambda s: s.split(","),
                     help="normal and/or student_t3")
    sim.add_argument("--methods", type=lambda s: s.split(","),
                     help="subset of bp,banding,sample")

    fc = subs.add_parser("forecast", help="conditional-mean forecasting")
    _add_common(fc)
    fc.add_argument("--train", help="training CSV")
    fc.add_argument("--test", help="test CSV")
    fc.add_argument("--split", type=int, help="size of the conditioning block")
    fc.add_argument("--estimators", type=lambda s: s.split(","))
    fc.add_argument("--k", type=int, help="banding order")
    fc.add_argument("--h", type=float, help="smoothing bandwidth for bp")
    fc.add_argument("--counts", action="store_const", const=True,
                    help="inputs are raw counts; apply the sqrt transform")

    subs.add_parser("project-selftest", help="quick internal checks")
    return parser


_COMMANDS = {
    "estimate": (ESTIMATE_DEFAULTS, cmd_estimate),
    "simulate": (SIMULATE_DEFAULTS, cmd_simulate),
    "forecast": (FORECAST_DEFAULTS, cmd_forecast),
    "project-selftest": ({}, cmd_selftest),
}


def main(argv=None):
    parser = _build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    defaults, runner = _COMMANDS[command]
    try:
        config = _load_config(args.pop("config", None))
        cfg = _resolve(defaults, config, args)
        _apply_threads(cfg.get("threads"))
        return runner(cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
