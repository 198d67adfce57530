"""Command line interface.

    ss2nc run     --config exp.cfg [--out DIR] [--seeds 0:10] [--jobs 4] [--method SS-G]
    ss2nc sweep   --config exp.cfg ...
    ss2nc compare --config exp.cfg ...
    ss2nc plot    DIR [--out DIR]
    ss2nc audit   DIR

Tables go to stdout as comma-separated rows.  Exit codes: 0 success,
2 configuration error, 3 runtime error or divergence, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import sys

from .config import load_config, with_overrides
from .errors import ConfigError
from .runner import RUN_COLUMNS, cmd_audit, cmd_compare, cmd_run, cmd_sweep
from .theory import validate_params

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4


def _load(args):
    cfg = load_config(args.config)
    overrides, drop = {}, ()
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    if args.method:
        overrides["methods"] = [m for item in args.method for m in item.split(",")]
        drop = ("method", "methods")
    if overrides:
        cfg = with_overrides(cfg, overrides, drop)
    return cfg


def _emit(rows, header, out=None):
    w = csv.writer(out or sys.stdout, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])


def _experiment(args, fn):
    cfg = _load(args)
    for cell_index, _, cell_cfg in cfg.cells():
        report = validate_params(cell_cfg.solver, cell_cfg.oracle)
        for check in report.warnings:
            print(f"warning: cell {cell_index}: {check.name}: {check.detail}", file=sys.stderr)
    report = fn(cfg, args.out, args.jobs)
    _emit(report.run_rows(), ("cell", *RUN_COLUMNS))
    print(f"# artifacts written to {report.out_dir}", file=sys.stderr)
    if report.diverged:
        for cell, method, seed in report.diverged:
            print(f"error: cell {cell} {method} seed {seed} diverged", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _plot(args):
    from .plotting import cmd_plot
    files, notices = cmd_plot(args.dir, args.out)
    for n in notices:
        print(f"notice: {n}", file=sys.stderr)
    for f in files:
        print(f)
    return EXIT_OK


def _audit(args):
    reports = cmd_audit(args.dir)
    rows = []
    for d, rep in reports.items():
        rows.append((str(d), rep.iterations_audited, *rep.violations.values(), rep.total))
    names = next(iter(reports.values())).violations.keys()
    _emit(rows, ("dir", "iterations_audited", *names, "total"))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ss2nc", description="Step-search negative curvature experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("sweep", cmd_sweep), ("compare", cmd_compare)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None, help="output directory (default: output_dir)")
        p.add_argument("--seeds", default=None, help="'a:b' range or comma list")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--method", action="append", default=None,
                       help="method name; repeat or comma-separate for several")
        p.set_defaults(handler=lambda a, fn=fn: _experiment(a, fn))
    p = sub.add_parser("plot")
    p.add_argument("dir")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_plot)
    p = sub.add_parser("audit")
    p.add_argument("dir")
    p.set_defaults(handler=_audit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
