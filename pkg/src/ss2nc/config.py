"""Experiment configuration: a flat ``dotted.key = value`` text format.

Example::

    # Rosenbrock, bounded noise, noise levels coupled to eps_f
    problem.name = rosenbrock2
    oracle.eps_f = 1e-3
    oracle.scaling = paper      # eps_g = eps_f^(1/2), eps_H = eps_lambda = eps_f^(1/3)
    solver.e_f_factor = 2       # e_f = 2 eps_f
    budget.max_iters = 5000
    method = SS2-NC-G
    seeds = 0:10
    sweep.oracle.eps_f = [1e-2, 1e-3, 0.0]

Values go through ``ast.literal_eval``; anything that is not a Python
literal is kept as a bare string.  Sweeps are resolved by re-applying the
whole flat mapping per cell, so coupled quantities (``oracle.scaling``,
``solver.e_f_factor``) follow the swept value.
"""
from __future__ import annotations

import ast
import itertools
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .oracles import OracleConfig
from .problems import PROBLEMS, ProblemSpec, get_problem
from .solver import Method, SolverParams

_BARE = re.compile(r"^[A-Za-z0-9_.:,+\-/]+$")

_ORACLE_FIELDS = {f.name for f in fields(OracleConfig)}
_SOLVER_FIELDS = {f.name for f in fields(SolverParams)} - {"max_iters", "max_fevals"}

# keys outside the oracle.* / solver.* field lists
_OTHER_KEYS = {
    "problem.name", "problem.dim", "problem.x0",
    "oracle.scaling", "solver.e_f_factor",
    "budget.max_iters", "budget.max_fevals",
    "method", "methods", "seeds", "output_dir",
    "report.terminal_window", "report.alpha_checkpoint",
}

SCALINGS = ("none", "paper")


def known_key(key: str) -> bool:
    if key in _OTHER_KEYS:
        return True
    section, _, name = key.partition(".")
    if section == "oracle":
        return name in _ORACLE_FIELDS
    if section == "solver":
        return name in _SOLVER_FIELDS
    return False


def parse_value(text: str):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        pass
    if _BARE.match(text):
        return text
    if text.startswith("[") and text.endswith("]") and text[1:-1].strip():
        # list of bare words, e.g. [SS-G, SS-NC-CG]
        return [parse_value(item) for item in text[1:-1].split(",")]
    raise ValueError(f"cannot parse value {text!r}")


def _strip_comment(text):
    # a '#' only starts a comment outside quotes
    quote = None
    for i, ch in enumerate(text):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return text[:i]
    return text


def parse_text(text: str) -> dict:
    """Parse config text into ``{key: (value, line_number)}``."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError("missing key", line=lineno)
        base = key[len("sweep."):] if key.startswith("sweep.") else key
        if not known_key(base):
            raise ConfigError("unknown key", field=key, line=lineno)
        if key in out:
            raise ConfigError(f"duplicate key (first set on line {out[key][1]})",
                              field=key, line=lineno)
        try:
            out[key] = (parse_value(value), lineno)
        except ValueError as exc:
            raise ConfigError(str(exc), field=key, line=lineno) from None
    return out


def parse_seeds(value) -> list:
    """Seeds as a list, a single integer or an ``"a:b"`` half-open range."""
    if isinstance(value, str):
        if ":" in value:
            lo, _, hi = value.partition(":")
            seeds = list(range(int(lo), int(hi)))
        else:
            seeds = [int(s) for s in value.split(",") if s.strip()]
    elif isinstance(value, bool):
        raise ValueError("seeds must be integers")
    elif isinstance(value, int):
        seeds = [value]
    else:
        seeds = [int(s) for s in value]
    if not seeds:
        raise ValueError("no seeds given")
    if any(s < 0 or s >= 2 ** 64 for s in seeds):
        raise ValueError("seeds must be 64-bit unsigned integers")
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    return seeds


def _coerce(name, value, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ValueError(f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)
    if kind is bool:
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        if not isinstance(value, bool):
            raise ValueError(f"expected true/false, got {value!r}")
        return value
    if kind == "optional_int":
        if value is None or (isinstance(value, str) and value.lower() == "none"):
            return None
        return _coerce(name, value, int)
    return value


def _field_kind(dc, name):
    if dc is SolverParams:
        if name == "max_fevals":
            return "optional_int"
        if name == "max_iters":
            return int
        if name == "halt_at_stationary":
            return bool
        return float
    if name == "zeroth_model":
        return str
    return float


@dataclass(frozen=True)
class ExperimentConfig:
    problem_name: str
    problem_dim: Optional[int]
    x0: Optional[tuple]
    oracle: OracleConfig
    solver: SolverParams
    methods: tuple
    seeds: tuple
    output_dir: str = "results"
    sweep: dict = field(default_factory=dict)
    terminal_window: int = 500
    alpha_checkpoint: int = 100
    flat: dict = field(default_factory=dict, repr=False)

    def problem(self) -> ProblemSpec:
        return get_problem(self.problem_name, self.problem_dim)

    def start(self):
        p = self.problem()
        return np.array(self.x0, dtype=float) if self.x0 is not None else p.default_start.copy()

    def snapshot(self) -> dict:
        """Fully resolved configuration as plain JSON-friendly values."""
        oracle = {f.name: getattr(self.oracle, f.name) for f in fields(OracleConfig)}
        oracle["zeroth_model"] = self.oracle.zeroth_model.value
        solver = {f.name: getattr(self.solver, f.name) for f in fields(SolverParams)}
        return {
            "problem": {"name": self.problem_name, "dim": self.problem().dim,
                        "x0": [float(v) for v in self.start()]},
            "oracle": oracle,
            "solver": solver,
            "methods": [m.value for m in self.methods],
            "seeds": list(self.seeds),
            "report": {"terminal_window": self.terminal_window,
                       "alpha_checkpoint": self.alpha_checkpoint},
            "flat": {k: v for k, v in self.flat.items()},
        }

    def cells(self):
        """Sweep cells as ``(index, overrides, config)``; no sweep gives one cell."""
        if not self.sweep:
            return [(0, {}, self)]
        keys = list(self.sweep)
        out = []
        for i, combo in enumerate(itertools.product(*(self.sweep[k] for k in keys))):
            overrides = dict(zip(keys, combo))
            flat = {k: v for k, v in self.flat.items() if not k.startswith("sweep.")}
            flat.update(overrides)
            cfg = resolve(flat)
            out.append((i, overrides, cfg))
        return out


def resolve(flat: dict, lines: dict | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a flat ``{key: value}`` mapping.

    ``sweep.*`` keys are collected, not applied.  ``lines`` maps keys to
    source line numbers for error messages.
    """
    lines = lines or {}

    def fail(msg, key):
        raise ConfigError(msg, field=key, line=lines.get(key))

    base = {k: v for k, v in flat.items() if not k.startswith("sweep.")}
    sweep = {}
    for key, values in flat.items():
        if key.startswith("sweep."):
            if not isinstance(values, (list, tuple)):
                fail("sweep values must be a list", key)
            target = key[len("sweep."):]
            if target in ("seeds", "method", "methods", "output_dir"):
                fail("this key cannot be swept", key)
            sweep[target] = list(values)

    for key in base:
        if not known_key(key):
            fail("unknown key", key)

    name = base.get("problem.name", "rosenbrock2")
    if name not in PROBLEMS:
        fail(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}", "problem.name")
    dim = base.get("problem.dim")
    if dim is not None:
        try:
            dim = _coerce("problem.dim", dim, int)
        except ValueError as exc:
            fail(str(exc), "problem.dim")
    x0 = base.get("problem.x0")
    if x0 is not None:
        try:
            x0 = tuple(float(v) for v in x0)
        except (TypeError, ValueError):
            fail("start point must be a list of numbers", "problem.x0")

    okw = {}
    for key, value in base.items():
        if key.startswith("oracle.") and key != "oracle.scaling":
            fname = key[len("oracle."):]
            try:
                okw[fname] = _coerce(key, value, _field_kind(OracleConfig, fname))
            except ValueError as exc:
                fail(str(exc), key)
    scaling = base.get("oracle.scaling", "none")
    if scaling not in SCALINGS:
        fail(f"expected one of {SCALINGS}", "oracle.scaling")
    if scaling == "paper":
        eps_f = okw.get("eps_f", 0.0)
        for fname, power in (("eps_g", 1 / 2), ("eps_H", 1 / 3), ("eps_lambda", 1 / 3)):
            if f"oracle.{fname}" in base:
                fail("conflicts with oracle.scaling = paper", f"oracle.{fname}")
            okw[fname] = eps_f ** power if eps_f > 0 else 0.0

    skw = {}
    for key, value in base.items():
        if key.startswith("solver.") and key != "solver.e_f_factor":
            fname = key[len("solver."):]
            try:
                skw[fname] = _coerce(key, value, _field_kind(SolverParams, fname))
            except ValueError as exc:
                fail(str(exc), key)
    if "solver.e_f_factor" in base:
        if "solver.e_f" in base:
            fail("set either solver.e_f or solver.e_f_factor", "solver.e_f_factor")
        try:
            factor = _coerce("solver.e_f_factor", base["solver.e_f_factor"], float)
        except ValueError as exc:
            fail(str(exc), "solver.e_f_factor")
        skw["e_f"] = factor * okw.get("eps_f", 0.0)
    for key, fname in (("budget.max_iters", "max_iters"), ("budget.max_fevals", "max_fevals")):
        if key in base:
            try:
                skw[fname] = _coerce(key, base[key], _field_kind(SolverParams, fname))
            except ValueError as exc:
                fail(str(exc), key)

    try:
        ocfg = OracleConfig(**okw)
    except ConfigError as exc:
        key = f"oracle.{exc.field}"
        raise ConfigError(str(exc).split("] ", 1)[-1], field=key,
                          line=lines.get(key, lines.get("oracle.scaling"))) from None
    try:
        params = SolverParams(**skw)
    except ConfigError as exc:
        key = {"max_iters": "budget.max_iters",
               "max_fevals": "budget.max_fevals"}.get(exc.field, f"solver.{exc.field}")
        raise ConfigError(str(exc).split("] ", 1)[-1], field=key, line=lines.get(key)) from None

    if "method" in base and "methods" in base:
        fail("set either method or methods", "methods")
    raw_methods = base.get("methods", base.get("method", Method.SS2_NC_G.value))
    mkey = "methods" if "methods" in base else "method"
    if isinstance(raw_methods, str):
        raw_methods = [m.strip() for m in raw_methods.split(",")]
    try:
        methods = tuple(Method(m) for m in raw_methods)
    except ValueError:
        fail(f"unknown method in {raw_methods!r}; choose from "
             f"{', '.join(m.value for m in Method)}", mkey)
    if not methods:
        fail("no method given", mkey)

    try:
        seeds = tuple(parse_seeds(base.get("seeds", [0])))
    except (TypeError, ValueError) as exc:
        fail(str(exc), "seeds")

    report = {}
    for key, default in (("report.terminal_window", 500), ("report.alpha_checkpoint", 100)):
        try:
            report[key] = _coerce(key, base.get(key, default), int)
        except ValueError as exc:
            fail(str(exc), key)
        if report[key] < 0:
            fail("must be >= 0", key)

    cfg = ExperimentConfig(
        problem_name=name, problem_dim=dim, x0=x0, oracle=ocfg, solver=params,
        methods=methods, seeds=seeds, output_dir=str(base.get("output_dir", "results")),
        sweep=sweep, terminal_window=report["report.terminal_window"],
        alpha_checkpoint=report["report.alpha_checkpoint"], flat=dict(flat))
    try:
        problem = cfg.problem()
    except (ValueError, KeyError) as exc:
        fail(str(exc), "problem.dim")
    if x0 is not None and len(x0) != problem.dim:
        fail(f"start point has {len(x0)} entries, problem has dimension {problem.dim}",
             "problem.x0")
    for key, values in sweep.items():
        if not known_key(key):
            fail("unknown sweep target", f"sweep.{key}")
    return cfg


def load_text(text: str) -> ExperimentConfig:
    parsed = parse_text(text)
    flat = {k: v for k, (v, _) in parsed.items()}
    lines = {k: ln for k, (_, ln) in parsed.items()}
    cfg = resolve(flat, lines)
    # validate every sweep cell up front so errors point at the sweep line
    for key, values in cfg.sweep.items():
        for value in values:
            trial = dict(flat)
            trial[key] = value
            try:
                resolve(trial)
            except ConfigError as exc:
                raise ConfigError(f"value {value!r}: {str(exc).split('] ', 1)[-1]}",
                                  field=f"sweep.{key}", line=lines.get(f"sweep.{key}")) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    return load_text(Path(path).read_text())


def with_overrides(cfg: ExperimentConfig, overrides: dict, drop=()) -> ExperimentConfig:
    """Re-resolve with extra flat keys (used for CLI flags)."""
    flat = {k: v for k, v in cfg.flat.items() if k not in drop}
    flat.update(overrides)
    return resolve(flat)


def dump_flat(flat: dict) -> str:
    """Render a flat mapping back to config text."""
    return "".join(f"{k} = {v!r}\n" for k, v in flat.items())


__all__ = ["ExperimentConfig", "load_config", "load_text", "resolve", "parse_text",
           "parse_seeds", "with_overrides", "dump_flat"]
