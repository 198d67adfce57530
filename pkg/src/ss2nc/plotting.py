"""Static figures from artifact directories.

One SVG per panel: objective, gradient norm, minimum eigenvalue and step
size against iterations and against function evaluations, plus contour
plots with trajectory snapshots for two-dimensional problems.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .runner import load_dir, run_dirs, trajectory  # noqa: E402

SNAPSHOTS = (100, 200, 1000, 5000)
_PANELS = {
    "f": ("true objective", True),
    "grad_norm": ("true gradient norm", True),
    "lambda_min": ("true minimum eigenvalue", False),
    "step": ("step size alpha", True),
}


def _label(summary):
    return f"{summary['method']} seed {summary['seed']}"


def _metric_panel(path, runs, metric, axis):
    title, logy = _PANELS[metric]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for run, traj in runs:
        xs = traj["k"] if axis == "iter" else traj["cost"]
        ys = traj[metric]
        if metric == "f" and logy:
            # shift so that the minimum value still shows on a log axis
            lb = run["lower_bound"]
            ys = ys - lb
        ax.plot(xs, ys, lw=0.9, label=_label(run["summary"]))
    if logy:
        ax.set_yscale("symlog" if metric == "f" else "log",
                      **({"linthresh": 1e-10} if metric == "f" else {}))
    ax.set_xlabel("iteration" if axis == "iter" else "function evaluations")
    ax.set_ylabel(title + (" - lower bound" if metric == "f" else ""))
    if len(runs) <= 12:
        ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _contour_panel(path, problem, xs, k):
    pad = 0.5
    lo = np.minimum(xs.min(axis=0), -2.0) - pad
    hi = np.maximum(xs.max(axis=0), 2.0) + pad
    gx = np.linspace(lo[0], hi[0], 200)
    gy = np.linspace(lo[1], hi[1], 200)
    X, Y = np.meshgrid(gx, gy)
    Z = np.array([[problem.eval_f(np.array([a, b])) for a, b in zip(ra, rb)]
                  for ra, rb in zip(X, Y)])
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.contour(X, Y, np.log1p(Z - problem.lower_bound), levels=25, linewidths=0.5)
    ax.plot(xs[:, 0], xs[:, 1], "-", lw=0.8, color="C3")
    ax.plot(xs[0, 0], xs[0, 1], "o", ms=4, color="k")
    ax.plot(xs[-1, 0], xs[-1, 1], "*", ms=7, color="C3")
    ax.set_title(f"after {k} iterations", fontsize=9)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plan(ld, out, snapshots):
    for run in ld.runs:
        if not run.records:
            raise ValueError(f"{run.trace_path}: empty trace, nothing to plot")
    problem = ld.problem()
    runs = [({"summary": r.summary, "lower_bound": problem.lower_bound}, trajectory(r.records))
            for r in ld.runs]
    jobs = [("metric", out / f"{metric}_vs_{axis}.svg", runs, metric, axis)
            for metric in _PANELS for axis in ("iter", "feval")]
    notices = []
    if problem.dim == 2:
        seen = set()
        for r in ld.runs:
            method = r.summary["method"]
            if method in seen:
                continue
            seen.add(method)
            xs = np.array([rec.x for rec in r.records])
            ks = [k for k in snapshots if k < len(xs) - 1] + [len(xs) - 1]
            for k in ks:
                jobs.append(("contour", out / f"contour_{method}_k{k}.svg", problem,
                             xs[:k + 1], k))
    else:
        notices.append(f"{ld.path}: dimension {problem.dim} > 2, contour panels skipped")
    return jobs, notices


def _render(jobs):
    files = []
    for job in jobs:
        job[1].parent.mkdir(parents=True, exist_ok=True)
        if job[0] == "metric":
            _metric_panel(*job[1:])
        else:
            _contour_panel(*job[1:])
        files.append(job[1])
    return files


def plot_dir(run_dir, out_dir=None, snapshots=SNAPSHOTS):
    """Render the panels of one run directory; returns ``(files, notices)``.

    All traces are loaded and checked before any file is written, so a bad
    or empty trace leaves nothing behind.
    """
    ld = load_dir(run_dir)
    out = Path(out_dir) if out_dir is not None else Path(run_dir) / "plots"
    jobs, notices = _plan(ld, out, snapshots)
    return _render(jobs), notices


def cmd_plot(root, out_dir=None, snapshots=SNAPSHOTS):
    """Plot every run directory under ``root`` (validating all of them first)."""
    root = Path(root)
    jobs, notices = [], []
    for d in run_dirs(root):
        ld = load_dir(d)
        out = d / "plots" if out_dir is None else Path(out_dir) / d.relative_to(root)
        j, n = _plan(ld, out, snapshots)
        jobs += j
        notices += n
    return _render(jobs), notices
