"""Multi-run orchestration: grid searches and method benchmarks.

Run seeds
---------
Run ``r`` of an experiment with master seed ``s`` uses the dataset seed
``SeedSequence(s, spawn_key=(r,)).generate_state(1, uint64)[0]``. The same
``(s, r)`` therefore always rebuilds the same ground truth and series,
whichever cell or worker processes it.

Tasks are plain frozen values. ``run_tasks`` maps them over a process pool
and returns rows in task order, so the worker count never changes results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .datagen import DatasetSpec, make_dataset
from .errors import DGlassoError
from .metrics import evaluate
from .solver import Mode, SolverConfig, fit, max_relative_rise

METHODS = ("DGLASSO", "MLEM", "A_ONLY", "P_ONLY")
TABLE_COLUMNS = (
    "rmse_A", "auc_A", "f1_A", "rmse_P", "auc_P", "f1_P", "rmse_Q",
    "cnmse_filter", "cnmse_smooth", "cnmse_pred", "test_negloglik",
)
SELECTION_METRICS = ("cnmse_filter", "rmse_A", "test_negloglik")


def run_seed(master_seed: int, run: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(run,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Task:
    dataset: DatasetSpec
    solver: SolverConfig
    labels: tuple = ()


def _row(report, res) -> dict:
    flat = report.flat()
    row = {
        "rmse_A": flat["rmse_A"], "auc_A": flat["edges_A_auc"], "f1_A": flat["edges_A_f1"],
        "rmse_P": flat["rmse_P"], "auc_P": flat["edges_P_auc"], "f1_P": flat["edges_P_f1"],
        "rmse_Q": flat["rmse_Q"], "cnmse_filter": flat["cnmse_filter"],
        "cnmse_smooth": flat["cnmse_smooth"], "cnmse_pred": flat["cnmse_pred"],
        "test_negloglik": flat["test_negloglik"],
    }
    row.update(outer_iterations=res.outer_iterations, converged=res.converged,
               loss_rise=max_relative_rise(res.loss_trace),
               wall_time_seconds=res.wall_time_seconds, error="")
    return row


def run_task(task: Task) -> dict:
    """Generate, fit and evaluate one task; solver errors become an error row."""
    row = dict(task.labels)
    row["seed"] = task.dataset.seed
    try:
        gt, train, test = make_dataset(task.dataset)
        obs = task.dataset.observation_model()
        res = fit(train, obs, task.solver)
        row.update(_row(evaluate(gt, res, obs, test), res))
    except DGlassoError as exc:
        row.update({c: math.nan for c in TABLE_COLUMNS})
        row.update(outer_iterations=0, converged=False, loss_rise=math.nan,
                   wall_time_seconds=math.nan,
                   error=f"{type(exc).__name__}: {exc}")
    return row


def run_tasks(tasks: Sequence[Task], jobs: int = 1) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_task, tasks, chunksize=1))


def grid_tasks(dataset: DatasetSpec, solver: SolverConfig, lambda_A_values, lambda_P_values,
               runs: int, master_seed: int) -> list:
    tasks = []
    for la in lambda_A_values:
        for lp in lambda_P_values:
            cfg = replace(solver, lambda_A=float(la), lambda_P=float(lp))
            for r in range(runs):
                spec = replace(dataset, seed=run_seed(master_seed, r))
                tasks.append(Task(spec, cfg, (("lambda_A", float(la)), ("lambda_P", float(lp)), ("run", r))))
    return tasks


def aggregate(rows: Sequence[dict], by: Sequence[str], columns=TABLE_COLUMNS) -> list:
    """Mean and standard deviation of ``columns`` per group, failed rows skipped."""
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in by), []).append(row)
    out = []
    for key, members in groups.items():
        ok = [m for m in members if not m.get("error")]
        agg = dict(zip(by, key))
        agg["n_ok"] = len(ok)
        agg["n_failed"] = len(members) - len(ok)
        for c in columns:
            vals = np.array([m[c] for m in ok], dtype=float)
            agg[f"{c}_mean"] = float(np.mean(vals)) if vals.size else math.nan
            agg[f"{c}_std"] = float(np.std(vals)) if vals.size else math.nan
        out.append(agg)
    return out


def select_best(rows: Sequence[dict], metric: str = "cnmse_filter") -> dict:
    """Grid cell with the smallest mean ``metric`` (ties: first in grid order)."""
    if metric not in SELECTION_METRICS:
        raise ValueError(f"selection metric must be one of {SELECTION_METRICS}")
    cells = [c for c in aggregate(rows, ("lambda_A", "lambda_P")) if c["n_ok"] > 0]
    if not cells:
        raise ValueError("every grid cell failed")
    return min(cells, key=lambda c: c[f"{metric}_mean"])


def tune(dataset: DatasetSpec, lambda_A_values, lambda_P_values, runs: int, master_seed: int,
         metric: str = "cnmse_filter", solver: Optional[SolverConfig] = None, jobs: int = 1):
    """Grid search; returns ``(best_cell, rows)``."""
    solver = solver or SolverConfig()
    rows = run_tasks(grid_tasks(dataset, solver, lambda_A_values, lambda_P_values, runs,
                                master_seed), jobs)
    return select_best(rows, metric), rows


def method_config(method: str, base: SolverConfig, nx: int, sigma_Q: float = 1.0) -> SolverConfig:
    """Solver settings of one benchmark row.

    ``A_ONLY`` keeps ``P = I / sigma_Q**2`` fixed, ``P_ONLY`` pins ``A = 0``.
    """
    mode = Mode(method)
    if mode is Mode.MLEM:
        return replace(base, mode=mode, lambda_A=0.0, lambda_P=0.0)
    if mode is Mode.A_ONLY:
        return replace(base, mode=mode, init_P=np.eye(nx) / sigma_Q ** 2)
    return replace(base, mode=mode)


def benchmark_tasks(datasets: Sequence[DatasetSpec], methods: Sequence[str], seeds: int,
                    master_seed: int, solvers: dict) -> list:
    """``solvers`` maps dataset name to the base (tuned) ``SolverConfig``."""
    tasks = []
    for ds in datasets:
        base = solvers.get(ds.name, SolverConfig())
        for method in methods:
            cfg = method_config(method, base, ds.Nx)
            for r in range(seeds):
                spec = replace(ds, seed=run_seed(master_seed, r))
                tasks.append(Task(spec, cfg, (("dataset", ds.name), ("method", method), ("run", r))))
    return tasks


def markdown_table(agg_rows: Sequence[dict], by=("dataset", "method")) -> str:
    head = list(by) + list(TABLE_COLUMNS)
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for a in agg_rows:
        cells = [str(a[k]) for k in by] + [f"{a[c + '_mean']:.4g}" for c in TABLE_COLUMNS]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
