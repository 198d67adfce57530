"""Trace CSV and run summary persistence.

The trace header is exactly :data:`~ss2nc.solver.RECORD_FIELDS`.  Floats are
written with ``repr`` (shortest round-trip decimal), booleans as ``0``/``1``,
the iterate ``x`` as space-separated floats and a missing sign choice as an
empty cell, so reading a trace back gives records equal to the originals and
identical runs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .solver import RECORD_FIELDS, IterationRecord, Method, Status, is_stationary

TRACE_SCHEMA = 1

_INT_FIELDS = {"k", "fevals_so_far", "gevals_so_far", "hevals_so_far"}
_BOOL_FIELDS = {"omega_g", "omega_H", "theta_g", "theta_H", "i_f", "i_g", "ihat_f",
                "i_H", "i_H_sq"}


def _fmt(name, value):
    if name == "x":
        return " ".join(repr(float(v)) for v in value)
    if name in _BOOL_FIELDS:
        return "1" if value else "0"
    if name in _INT_FIELDS:
        return str(int(value))
    if name == "sign_choice":
        return "" if value is None else str(int(value))
    return repr(float(value))


def _parse(name, text):
    if name == "x":
        return np.array([float(v) for v in text.split()], dtype=float)
    if name in _BOOL_FIELDS:
        if text not in ("0", "1"):
            raise ValueError(f"bad boolean {text!r} in column {name}")
        return text == "1"
    if name in _INT_FIELDS:
        return int(text)
    if name == "sign_choice":
        return None if text == "" else int(text)
    return float(text)


def trace_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for rec in records:
        w.writerow([_fmt(name, getattr(rec, name)) for name in RECORD_FIELDS])
    return buf.getvalue()


def write_trace(path, records):
    Path(path).write_text(trace_text(records))


def read_trace(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty trace file") from None
        if tuple(header) != RECORD_FIELDS:
            raise ValueError(f"{path}: header does not match the record schema")
        records = []
        for row in reader:
            if len(row) != len(RECORD_FIELDS):
                raise ValueError(f"{path}: row {len(records) + 2} has {len(row)} cells")
            records.append(IterationRecord(**{n: _parse(n, t) for n, t in zip(RECORD_FIELDS, row)}))
    return records


def records_equal(a, b) -> bool:
    """Field-wise equality treating nan as equal to nan."""
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        for name in RECORD_FIELDS:
            va, vb = getattr(ra, name), getattr(rb, name)
            if name == "x":
                if not np.array_equal(va, vb, equal_nan=True):
                    return False
            elif isinstance(va, float) and math.isnan(va):
                if not (isinstance(vb, float) and math.isnan(vb)):
                    return False
            elif va != vb:
                return False
    return True


# ----------------------------------------------------------------------
# per-run metrics


def terminal_mean(records, window):
    """Mean true objective over the last ``window`` iterates."""
    if not records:
        return math.nan
    tail = records[-window:] if window > 0 else records
    return float(np.mean([r.f_true for r in tail]))


def accepted_step_at(records, k):
    """Step size of the latest accepted descent step at or before iteration ``k``."""
    for rec in reversed(records[:k + 1]):
        if rec.theta_g:
            return rec.alpha_k
    return math.nan


def summarize(records, method, seed, params, terminal_window=500, alpha_checkpoint=100,
              diverged=False, audit=None) -> dict:
    """Terminal metrics of one run, all recomputable from its trace."""
    if records:
        last = records[-1]
        f_all = [r.f_true for r in records] + [last.f_next_true]
        stop = None
        for r in records:
            if is_stationary(r.grad_true_norm, r.lambda_true, params.epsbar_g,
                             params.epsbar_H, params.epsbar_lambda):
                stop = r.k
                break
        status = (Status.HIT_STOPPING_TIME if params.halt_at_stationary and stop is not None
                  and stop == last.k else Status.BUDGET_EXHAUSTED)
        body = dict(
            iterations=len(records),
            status=status.value,
            stopping_time=stop,
            final_f_true=float(last.f_next_true),
            best_f_true=float(np.nanmin(f_all)),
            best_grad_norm=float(min(r.grad_true_norm for r in records)),
            final_grad_norm=float(last.grad_true_norm),
            final_lambda=float(last.lambda_true),
            terminal_f_mean=terminal_mean(records, terminal_window),
            accepted_alpha_at_checkpoint=accepted_step_at(records, alpha_checkpoint),
            feval_count=int(last.fevals_so_far),
            geval_count=int(last.gevals_so_far),
            heval_count=int(last.hevals_so_far),
        )
    else:
        body = dict(iterations=0, status=Status.BUDGET_EXHAUSTED.value, stopping_time=None,
                    final_f_true=math.nan, best_f_true=math.nan, best_grad_norm=math.nan,
                    final_grad_norm=math.nan, final_lambda=math.nan,
                    terminal_f_mean=math.nan, accepted_alpha_at_checkpoint=math.nan,
                    feval_count=0, geval_count=0, heval_count=0)
    return dict(method=Method(method).value, seed=int(seed), trace_schema=TRACE_SCHEMA,
                diverged=bool(diverged), **body, audit=audit)


def write_summary(path, summary):
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _same(a, b):
    if isinstance(a, float) and isinstance(b, float):
        if math.isnan(a) and math.isnan(b):
            return True
        return a == b or abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))
    return a == b


def check_summary(summary, records, params, terminal_window, alpha_checkpoint):
    """Recompute ``summary`` from ``records``; raise ValueError on any mismatch."""
    if summary.get("trace_schema") != TRACE_SCHEMA:
        raise ValueError(f"unsupported trace schema {summary.get('trace_schema')!r}")
    fresh = summarize(records, summary["method"], summary["seed"], params,
                      terminal_window, alpha_checkpoint, summary["diverged"],
                      summary.get("audit"))
    bad = [k for k in fresh if not _same(fresh[k], summary.get(k))]
    if bad:
        raise ValueError(f"summary disagrees with trace in {', '.join(sorted(bad))}")
    return fresh


def read_summary(path) -> dict:
    return json.loads(Path(path).read_text())
