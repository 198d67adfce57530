"""Experiment execution and aggregation.

Layout of an output directory::

    config.json               resolved configuration
    runs.csv                  one row per run (delimited summary table)
    <method>_s<seed>.csv      trace of one run
    <method>_s<seed>.json     terminal metrics of that run
    aggregate.csv             quantiles of best-so-far metrics at checkpoints
    levels.csv, tail.csv      per-cell medians and P[N > t] curves (sweeps)
    compare.csv               current-value curves per method (comparisons)

A sweep writes one such run directory per cell (``cell00``, ``cell01``, ...)
plus ``cells.json`` and the cross-cell files at the top level.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, DivergenceError
from .oracles import OracleConfig, RngStream
from .problems import get_problem
from .solver import Method, RunResult, SolverParams, run_method
from .theory import compute_constants, lemma_audit, tail_estimate
from .traces import check_summary, read_summary, read_trace, summarize, write_summary, write_trace

QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)
RUN_COLUMNS = ("method", "seed", "iterations", "status", "stopping_time", "final_f_true",
               "best_f_true", "best_grad_norm", "final_lambda", "feval_count", "diverged")
METRICS = ("f", "grad_norm", "lambda_min", "step")


def run_name(method, seed):
    return f"{Method(method).value}_s{seed}"


def _num(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])


# ----------------------------------------------------------------------
# single runs


def trajectory(records):
    """Arrays used for checkpoint alignment.

    ``cost[k]`` is the number of function evaluations spent before iterate
    ``x_k`` was reached, so metrics of ``x_k`` become available at that cost.
    """
    n = len(records)
    cost = np.zeros(n)
    if n > 1:
        cost[1:] = [r.fevals_so_far for r in records[:-1]]
    return dict(
        k=np.arange(n, dtype=float), cost=cost,
        f=np.array([r.f_true for r in records]),
        grad_norm=np.array([r.grad_true_norm for r in records]),
        lambda_min=np.array([r.lambda_true for r in records]),
        step=np.array([r.alpha_k for r in records]),
    )


def audit_single(records, cfg_problem, params, ocfg):
    constants = compute_constants(cfg_problem, params, ocfg)
    rep = lemma_audit([RunResult(Method.SS2_NC_G, records)], constants, ocfg, params)
    return dict(rep.violations)


def execute(cfg: ExperimentConfig, method, seed, run_dir):
    """Run one (method, seed), write its trace and summary, return the summary
    and the checkpoint arrays."""
    problem = cfg.problem()
    diverged = False
    try:
        result = run_method(method, problem, cfg.oracle, cfg.solver, cfg.start(),
                            RngStream(seed))
    except DivergenceError as exc:
        diverged = True
        result = exc.partial
    records = result.records
    run_dir = Path(run_dir)
    name = run_name(method, seed)
    write_trace(run_dir / f"{name}.csv", records)
    audit = audit_single(records, problem, cfg.solver, cfg.oracle)
    summary = summarize(records, method, seed, cfg.solver, cfg.terminal_window,
                        cfg.alpha_checkpoint, diverged, audit)
    write_summary(run_dir / f"{name}.json", summary)
    return summary, trajectory(records)


def _execute_task(task):
    return execute(*task)


def _map(tasks, jobs):
    if jobs is None or jobs <= 1 or len(tasks) <= 1:
        return [_execute_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_execute_task, tasks))


# ----------------------------------------------------------------------
# checkpoints and aggregates


def checkpoint_grid(limit):
    """0, powers of two below ``limit``, and ``limit`` itself."""
    limit = int(limit)
    grid = [0]
    c = 1
    while c < limit:
        grid.append(c)
        c *= 2
    if limit > 0:
        grid.append(limit)
    return grid


def checkpoint_values(axis_values, values, grid, mode="best", higher_is_better=False):
    """Piecewise-constant read-out of ``values`` at ``grid`` points.

    ``mode="best"`` uses the running best; ``"current"`` the latest value.
    A checkpoint before the first entry reads the first entry.
    """
    values = np.asarray(values, dtype=float)
    if mode == "best":
        acc = np.maximum.accumulate if higher_is_better else np.minimum.accumulate
        values = acc(values)
    elif mode != "current":
        raise ValueError(f"unknown mode {mode!r}")
    idx = np.searchsorted(np.asarray(axis_values), np.asarray(grid, dtype=float), side="right") - 1
    return values[np.clip(idx, 0, len(values) - 1)]


def _axis_limit(trajs, axis, params: SolverParams):
    if axis == "iter":
        return max(len(t["k"]) for t in trajs) - 1
    if params.max_fevals is not None:
        return params.max_fevals
    return int(max(t["cost"][-1] for t in trajs))


def aggregate_rows(trajs, params, mode, metrics):
    """Quantile rows ``(axis, checkpoint, metric, n, q10..q90)``."""
    rows = []
    trajs = [t for t in trajs if len(t["k"])]
    if not trajs:
        return rows
    for axis, key in (("iter", "k"), ("feval", "cost")):
        grid = checkpoint_grid(_axis_limit(trajs, axis, params))
        for metric in metrics:
            hib = metric == "lambda_min"
            table = np.array([checkpoint_values(t[key], t[metric], grid, mode, hib)
                              for t in trajs])
            qs = np.quantile(table, QUANTILES, axis=0)
            for j, c in enumerate(grid):
                rows.append((axis, c, metric, len(trajs), *qs[:, j]))
    return rows


AGG_HEADER = ("cell", "method", "axis", "checkpoint", "metric", "n",
              "q10", "q25", "median", "q75", "q90")


def _median(values):
    arr = np.array([math.nan if v is None else v for v in values], dtype=float)
    if np.all(np.isnan(arr)):
        return math.nan
    return float(np.nanmedian(arr))


@dataclass
class CellOutcome:
    index: int
    overrides: dict
    config: ExperimentConfig
    directory: Path
    summaries: list
    trajectories: list

    def by_method(self, method):
        pairs = [(s, t) for s, t in zip(self.summaries, self.trajectories)
                 if s["method"] == Method(method).value]
        return [p[0] for p in pairs], [p[1] for p in pairs]


@dataclass
class Report:
    out_dir: Path
    cells: list = field(default_factory=list)

    @property
    def diverged(self):
        return [(c.index, s["method"], s["seed"]) for c in self.cells for s in c.summaries
                if s["diverged"]]

    def run_rows(self):
        for c in self.cells:
            for s in c.summaries:
                yield (c.index, *[s[k] for k in RUN_COLUMNS])


def _run_cell(cfg, index, overrides, cell_dir, jobs, methods=None):
    cell_dir = Path(cell_dir)
    cell_dir.mkdir(parents=True, exist_ok=True)
    (cell_dir / "config.json").write_text(json.dumps(cfg.snapshot(), indent=2, sort_keys=True)
                                          + "\n")
    methods = methods or cfg.methods
    tasks = [(cfg, m, s, cell_dir) for m in methods for s in cfg.seeds]
    results = _map(tasks, jobs)
    summaries = [r[0] for r in results]
    _write_csv(cell_dir / "runs.csv", RUN_COLUMNS,
               ([s[k] for k in RUN_COLUMNS] for s in summaries))
    return CellOutcome(index, overrides, cfg, cell_dir, summaries, [r[1] for r in results])


def _write_aggregate(path, cells, mode, metrics):
    rows = []
    for c in cells:
        for m in c.config.methods:
            _, trajs = c.by_method(m)
            for row in aggregate_rows(trajs, c.config.solver, mode, metrics):
                rows.append((c.index, m.value, *row))
    _write_csv(path, AGG_HEADER, rows)


def cmd_run(cfg: ExperimentConfig, out_dir=None, jobs=1) -> Report:
    """Every method x seed of a single configuration."""
    out = Path(out_dir or cfg.output_dir)
    cell = _run_cell(cfg, 0, {}, out, jobs)
    _write_aggregate(out / "aggregate.csv", [cell], "best", ("f", "grad_norm", "lambda_min"))
    return Report(out, [cell])


def _level_row(cell, method, keys):
    sums, _ = cell.by_method(method)
    stops = [s["stopping_time"] for s in sums]
    return (cell.index, Method(method).value,
            *[repr(cell.overrides.get(k)) for k in keys], len(sums),
            _median([s["best_f_true"] for s in sums]),
            _median([s["best_grad_norm"] for s in sums]),
            _median([s["final_f_true"] for s in sums]),
            _median([s["terminal_f_mean"] for s in sums]),
            _median([s["accepted_alpha_at_checkpoint"] for s in sums]),
            _median([math.inf if t is None else t for t in stops]),
            sum(t is not None for t in stops) / max(len(stops), 1),
            sum(s["diverged"] for s in sums))


def level_header(keys):
    return ("cell", "method", *keys, "n_runs", "median_best_f", "median_best_grad",
            "median_final_f", "median_terminal_f", "median_accepted_alpha",
            "median_stopping_time", "frac_stopped", "n_diverged")


def cmd_sweep(cfg: ExperimentConfig, out_dir=None, jobs=1) -> Report:
    """Cross product of the sweep lists; an empty sweep behaves like :func:`cmd_run`."""
    if not cfg.sweep:
        return cmd_run(cfg, out_dir, jobs)
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.snapshot(), indent=2, sort_keys=True) + "\n")
    cells = []
    index = []
    for i, overrides, cell_cfg in cfg.cells():
        name = f"cell{i:02d}"
        cells.append(_run_cell(cell_cfg, i, overrides, out / name, jobs))
        index.append({"cell": i, "dir": name, "overrides": overrides})
    (out / "cells.json").write_text(json.dumps(index, indent=2) + "\n")
    _write_aggregate(out / "aggregate.csv", cells, "best", ("f", "grad_norm", "lambda_min"))

    keys = list(cfg.sweep)
    _write_csv(out / "levels.csv", level_header(keys),
               (_level_row(c, m, keys) for c in cells for m in c.config.methods))

    t_grid = checkpoint_grid(cfg.solver.max_iters)
    tail_rows = []
    for c in cells:
        for m in c.config.methods:
            sums, _ = c.by_method(m)
            if len(sums) < 2:
                continue
            curve = tail_estimate([_StopOnly(s["stopping_time"]) for s in sums], t_grid)
            for t, p, se in zip(curve.t, curve.prob, curve.stderr):
                tail_rows.append((c.index, m.value, int(t), p, se, curve.n_runs))
    _write_csv(out / "tail.csv", ("cell", "method", "t", "prob", "stderr", "n_runs"), tail_rows)
    return Report(out, cells)


@dataclass
class _StopOnly:
    stopping_time: object


def cmd_compare(cfg: ExperimentConfig, out_dir=None, jobs=1) -> Report:
    """All listed methods on identical seeds and budgets, aligned on fevals."""
    if len(cfg.methods) < 2:
        raise ConfigError("a comparison needs at least two methods", field="methods")
    out = Path(out_dir or cfg.output_dir)
    cell = _run_cell(cfg, 0, {}, out, jobs)
    _write_aggregate(out / "aggregate.csv", [cell], "best", ("f", "grad_norm", "lambda_min"))
    _write_aggregate(out / "compare.csv", [cell], "current", METRICS)
    return Report(out, [cell])


# ----------------------------------------------------------------------
# loading


@dataclass
class LoadedRun:
    summary: dict
    records: list
    trace_path: Path


@dataclass
class LoadedDir:
    path: Path
    snapshot: dict
    runs: list

    @property
    def params(self) -> SolverParams:
        return SolverParams(**self.snapshot["solver"])

    @property
    def oracle(self) -> OracleConfig:
        return OracleConfig(**self.snapshot["oracle"])

    def problem(self):
        p = self.snapshot["problem"]
        return get_problem(p["name"], p["dim"])


def run_dirs(root):
    """Every directory under ``root`` (inclusive) that holds a ``config.json``
    and at least one trace."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"no artifact directory at {root}")
    found = []
    for cfg_path in sorted(root.rglob("config.json")):
        d = cfg_path.parent
        if any(d.glob("*_s*.csv")):
            found.append(d)
    if not found:
        raise FileNotFoundError(f"no traces under {root}")
    return found


def load_dir(path, check=True) -> LoadedDir:
    """Load every trace of a run directory and check its summary against it."""
    path = Path(path)
    snap = json.loads((path / "config.json").read_text())
    loaded = LoadedDir(path, snap, [])
    params = loaded.params
    report = snap.get("report", {})
    for trace in sorted(path.glob("*_s*.csv")):
        summary_path = trace.with_suffix(".json")
        if not summary_path.exists():
            raise FileNotFoundError(f"missing summary for {trace.name}")
        summary = read_summary(summary_path)
        records = read_trace(trace)
        if check:
            check_summary(summary, records, params, report.get("terminal_window", 500),
                          report.get("alpha_checkpoint", 100))
        loaded.runs.append(LoadedRun(summary, records, trace))
    return loaded


def cmd_audit(root):
    """Lemma audit of every run directory below ``root``; writes ``audit.json``
    next to the traces and returns ``{dir: AuditReport}``."""
    out = {}
    for d in run_dirs(root):
        ld = load_dir(d)
        params, ocfg = ld.params, ld.oracle
        constants = compute_constants(ld.problem(), params, ocfg)
        results = [RunResult(Method(r.summary["method"]), r.records) for r in ld.runs]
        rep = lemma_audit(results, constants, ocfg, params)
        (d / "audit.json").write_text(json.dumps({
            "violations": rep.violations, "extra": rep.extra,
            "iterations_audited": rep.iterations_audited,
            "frequencies": rep.frequencies,
            "alpha_bar": constants.alpha_bar, "beta_bar": constants.beta_bar,
            "issues": constants.issues,
        }, indent=2, sort_keys=True) + "\n")
        out[d] = rep
    return out
