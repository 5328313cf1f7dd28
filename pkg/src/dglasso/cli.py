"""Command-line front end.

Subcommands::

    dglasso generate  --preset A --seed 7 --out data/
    dglasso fit       --data data/ --lambda-A 10 --lambda-P 10 --out fit/
    dglasso eval      --data data/ --fit fit/ --out fit/
    dglasso grid      --preset A --lambda-A 1 10 --lambda-P 1 10 --runs 2 --out grid/
    dglasso benchmark --datasets A B --seeds 5 --out bench/

Global flags ``--config``, ``--seed``, ``--jobs`` and ``--out`` may appear
before or after the subcommand. A JSON config may carry ``dataset`` (preset
name or ``DatasetSpec`` fields), ``solver`` (``SolverConfig`` fields with an
optional nested ``inner``), ``grid``, ``benchmark``, ``seed`` and
``output_dir``; command-line values override it.

Exit codes: 0 success, 1 solver failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from .datagen import DatasetSpec, GroundTruth, make_dataset
from .errors import DGlassoError
from .inner import InnerConfig
from .io import config_hash, read_json, read_matrix, read_series, write_json, write_matrix, write_series
from .lgssm import TimeSeries, spd_inverse
from .metrics import evaluate
from .solver import FitResult, Mode, SolverConfig, fit

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config


def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{p}: top level must be an object")
    return cfg


def _dataset_spec(cfg: dict, args) -> DatasetSpec:
    raw = cfg.get("dataset", "A")
    preset = getattr(args, "preset", None)
    if preset is not None:
        raw = preset
    if isinstance(raw, str):
        spec = DatasetSpec.preset(raw)
    elif isinstance(raw, dict):
        raw = dict(raw)
        name = raw.pop("preset", None)
        spec = DatasetSpec.preset(name, **raw) if name else DatasetSpec.from_dict(raw)
    else:
        raise UsageError("config 'dataset' must be a preset name or an object")
    if getattr(args, "K", None) is not None:
        spec = replace(spec, K=args.K)
    if getattr(args, "sparsity_keep", None) is not None:
        spec = replace(spec, sparsity_keep=args.sparsity_keep)
    return spec


def _solver_config(cfg: dict, args) -> SolverConfig:
    raw = dict(cfg.get("solver", {}))
    inner = InnerConfig(**raw.pop("inner", {}))
    for key in ("init_A", "init_P"):
        if raw.get(key) is not None:
            raw[key] = np.asarray(raw[key], dtype=float)
    for key in ("lambda_A", "lambda_P", "mode", "max_outer"):
        val = getattr(args, key, None)
        if val is not None and not isinstance(val, list):
            raw[key] = val
    return SolverConfig(inner=inner, **raw)


def _seed(cfg: dict, args) -> int:
    s = args.seed if args.seed is not None else cfg.get("seed", 0)
    if not 0 <= int(s) < 2 ** 64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    return int(s)


def _out_dir(cfg: dict, args) -> Path:
    out = Path(args.out or cfg.get("output_dir") or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    return out


def _need(path: Path) -> Path:
    if not path.is_file():
        raise UsageError(f"input file not found: {path}")
    return path


def _snapshot(**parts) -> dict:
    """JSON-ready config snapshot used for hashing and provenance."""
    out = {}
    for k, v in parts.items():
        if isinstance(v, DatasetSpec):
            out[k] = v.to_dict()
        elif isinstance(v, SolverConfig):
            d = asdict(v)
            d["mode"] = v.mode.value
            for m in ("init_A", "init_P"):
                if d[m] is not None:
                    d[m] = np.asarray(d[m]).tolist()
            out[k] = d
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------- commands


def cmd_generate(cfg: dict, args) -> int:
    spec = replace(_dataset_spec(cfg, args), seed=_seed(cfg, args))
    out = _out_dir(cfg, args)
    gt, train, test = make_dataset(spec)
    write_matrix(out / "A_star.csv", gt.A_star)
    write_matrix(out / "P_star.csv", gt.P_star)
    write_series(out / "train.csv", train.observations)
    write_series(out / "test.csv", test.observations)
    write_json(out / "spec.json", {"dataset": spec.to_dict()}, _snapshot(dataset=spec))
    print(f"wrote dataset {spec.name} (seed {spec.seed}) to {out}")
    return EXIT_OK


def _read_spec(data: Path) -> DatasetSpec:
    path = _need(data / "spec.json")
    try:
        return DatasetSpec.from_dict(read_json(path)["dataset"])
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{path}: malformed dataset spec ({exc})") from None


def cmd_fit(cfg: dict, args) -> int:
    data = Path(args.data)
    spec = _read_spec(data)
    train = TimeSeries(read_series(_need(data / args.series)))
    solver = _solver_config(cfg, args)
    if solver.mode is Mode.A_ONLY and solver.init_P is None:
        solver = ex.method_config("A_ONLY", solver, spec.Nx)
    out = _out_dir(cfg, args)
    try:
        res = fit(train, spec.observation_model(), solver)
    except DGlassoError as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None:
            _write_fit(out, partial, spec, solver, error=str(exc))
        raise
    _write_fit(out, res, spec, solver)
    print(f"{solver.mode.value}: {res.outer_iterations} outer iterations, "
          f"converged={res.converged}, loss={res.loss_trace[-1]:.6f}")
    return EXIT_OK


def _write_fit(out: Path, res: FitResult, spec, solver, error: str = "") -> None:
    write_matrix(out / "A_hat.csv", res.A_hat)
    write_matrix(out / "P_hat.csv", res.P_hat)
    payload = {"fit": res.to_dict(), "solver": _snapshot(s=solver)["s"], "error": error}
    write_json(out / "fit.json", payload, _snapshot(dataset=spec, solver=solver))


def cmd_eval(cfg: dict, args) -> int:
    data, fdir = Path(args.data), Path(args.fit)
    spec = _read_spec(data)
    P_star = read_matrix(_need(data / "P_star.csv"))
    gt = GroundTruth(read_matrix(_need(data / "A_star.csv")), P_star,
                     spd_inverse(P_star, "P*"), spec)
    test = TimeSeries(read_series(_need(data / "test.csv")))
    A_hat = read_matrix(_need(fdir / "A_hat.csv"))
    P_hat = read_matrix(_need(fdir / "P_hat.csv"))
    res = FitResult(A_hat, P_hat, spd_inverse(P_hat, "P_hat"), np.empty(0), 0, True, 0.0)
    report = evaluate(gt, res, spec.observation_model(), test)
    out = _out_dir(cfg, args)
    write_json(out / "metrics.json", {"metrics": report.flat()},
               {"dataset": spec.to_dict(), "fit_dir": str(fdir)})
    for k, v in report.flat().items():
        if not k.endswith(("threshold", "defined")):
            print(f"{k:24s} {v:.6g}")
    return EXIT_OK


def _write_rows(path: Path, rows, leading) -> None:
    cols = list(leading) + [c for c in rows[0] if c not in leading]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _grid_settings(cfg: dict, args) -> dict:
    g = dict(cfg.get("grid", {}))
    if args.lambda_A is not None:
        g["lambda_A_values"] = args.lambda_A
    if args.lambda_P is not None:
        g["lambda_P_values"] = args.lambda_P
    if args.runs is not None:
        g["runs"] = args.runs
    if args.metric is not None:
        g["selection_metric"] = args.metric
    g.setdefault("runs", 1)
    g.setdefault("selection_metric", "cnmse_filter")
    if not g.get("lambda_A_values") or not g.get("lambda_P_values"):
        raise UsageError("grid needs nonempty lambda_A_values and lambda_P_values")
    if int(g["runs"]) < 1:
        raise UsageError("grid runs must be >= 1")
    if g["selection_metric"] not in ex.SELECTION_METRICS:
        raise UsageError(f"selection metric must be one of {ex.SELECTION_METRICS}")
    return g


def cmd_grid(cfg: dict, args) -> int:
    spec = _dataset_spec(cfg, args)
    solver = _solver_config(cfg, args)
    g = _grid_settings(cfg, args)
    seed = _seed(cfg, args)
    out = _out_dir(cfg, args)
    tasks = ex.grid_tasks(spec, solver, g["lambda_A_values"], g["lambda_P_values"],
                          int(g["runs"]), seed)
    rows = ex.run_tasks(tasks, args.jobs)
    snap = _snapshot(dataset=spec, solver=solver, grid=g, seed=seed)
    _write_rows(out / "grid.csv", rows, ("lambda_A", "lambda_P", "run", "seed"))
    failed = sum(1 for r in rows if r["error"])
    try:
        best = ex.select_best(rows, g["selection_metric"])
    except ValueError as exc:
        write_json(out / "best.json", {"best": None, "error": str(exc)}, snap)
        print(f"grid: all {len(rows)} runs failed", file=sys.stderr)
        return EXIT_SOLVER
    write_json(out / "best.json", {"best": best, "selection_metric": g["selection_metric"],
                                   "failed_runs": failed}, snap)
    print(f"best (lambda_A, lambda_P) = ({best['lambda_A']:g}, {best['lambda_P']:g}) "
          f"by {g['selection_metric']}; {failed} failed runs")
    return EXIT_OK


def cmd_benchmark(cfg: dict, args) -> int:
    b = dict(cfg.get("benchmark", {}))
    datasets = args.datasets or b.get("datasets", ["A", "B", "C", "D"])
    methods = args.methods or b.get("methods", list(ex.METHODS))
    seeds = args.seeds if args.seeds is not None else int(b.get("seeds", 50))
    for m in methods:
        if m not in ex.METHODS:
            raise UsageError(f"unknown method {m!r}; expected one of {ex.METHODS}")
    if seeds < 1:
        raise UsageError("--seeds must be >= 1")
    base = _solver_config(cfg, args)
    over = {}
    if args.K is not None:
        over["K"] = args.K
    if args.sparsity_keep is not None:
        over["sparsity_keep"] = args.sparsity_keep
    specs = [DatasetSpec.preset(d, **over) for d in datasets]
    lambdas = b.get("lambdas", {})
    solvers = {}
    for s in specs:
        la, lp = lambdas.get(s.name, (base.lambda_A, base.lambda_P))
        solvers[s.name] = replace(base, lambda_A=float(la), lambda_P=float(lp))
    seed = _seed(cfg, args)
    out = _out_dir(cfg, args)
    rows = ex.run_tasks(ex.benchmark_tasks(specs, methods, seeds, seed, solvers), args.jobs)
    agg = ex.aggregate(rows, ("dataset", "method"))
    snap = _snapshot(datasets=[s.to_dict() for s in specs], methods=methods, seeds=seeds,
                     seed=seed, solvers={k: _snapshot(s=v)["s"] for k, v in solvers.items()})
    _write_rows(out / "benchmark_runs.csv", rows, ("dataset", "method", "run", "seed"))
    _write_rows(out / "benchmark.csv", agg, ("dataset", "method"))
    table = ex.markdown_table(agg)
    (out / "benchmark.md").write_text(
        f"<!-- dglasso {__version__} config_hash {config_hash(snap)} -->\n" + table)
    print(table, end="")
    failed = sum(1 for r in rows if r["error"])
    if failed:
        print(f"{failed} of {len(rows)} runs failed", file=sys.stderr)
    return EXIT_SOLVER if failed == len(rows) else EXIT_OK


# ---------------------------------------------------------------- parser


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="JSON experiment config")
    p.add_argument("--seed", type=int, default=d, help="master seed (u64)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="worker processes for grid/benchmark")
    p.add_argument("--out", default=d, help="output directory")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--max-outer", dest="max_outer", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dglasso", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate a dataset")
    p.add_argument("--preset", choices=["A", "B", "C", "D"])
    p.add_argument("-K", type=int)
    p.add_argument("--sparsity-keep", dest="sparsity_keep", type=int)
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit (A, P) to a training series")
    p.add_argument("--data", required=True, help="directory written by 'generate'")
    p.add_argument("--series", default="train.csv")
    p.add_argument("--lambda-A", dest="lambda_A", type=float)
    p.add_argument("--lambda-P", dest="lambda_P", type=float)
    _solver_flags(p)
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score a fit against the ground truth")
    p.add_argument("--data", required=True)
    p.add_argument("--fit", required=True, help="directory written by 'fit'")
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="grid search over (lambda_A, lambda_P)")
    p.add_argument("--preset", choices=["A", "B", "C", "D"])
    p.add_argument("-K", type=int)
    p.add_argument("--sparsity-keep", dest="sparsity_keep", type=int)
    p.add_argument("--lambda-A", dest="lambda_A", type=float, nargs="+")
    p.add_argument("--lambda-P", dest="lambda_P", type=float, nargs="+")
    p.add_argument("--runs", type=int)
    p.add_argument("--metric", choices=ex.SELECTION_METRICS)
    _solver_flags(p)
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("benchmark", help="compare methods over presets and seeds")
    p.add_argument("--datasets", nargs="+", choices=["A", "B", "C", "D"])
    p.add_argument("--methods", nargs="+")
    p.add_argument("--seeds", type=int)
    p.add_argument("-K", type=int)
    p.add_argument("--sparsity-keep", dest="sparsity_keep", type=int)
    p.add_argument("--lambda-A", dest="lambda_A", type=float)
    p.add_argument("--lambda-P", dest="lambda_P", type=float)
    p.add_argument("--max-outer", dest="max_outer", type=int)
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args.config)
        return args.func(cfg, args)
    except UsageError as exc:
        print(f"dglasso: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DGlassoError as exc:
        print(f"dglasso: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, ValueError, TypeError) as exc:
        print(f"dglasso: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
