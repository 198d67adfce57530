"""Acceptance gate: one test, and one PASS/FAIL line, per criterion.

The noisy experiments run through the harness (``cmd_run``/``cmd_sweep``/
``cmd_compare``) so the artifacts they write are the ones checked by the
replay and determinism criteria.  Run with ``pytest tests/test_acceptance.py``;
the verdict lines are repeated in the terminal summary.
"""
import math
import shutil
import time

import numpy as np
import pytest

from reference import binomial_slack, lambda_min_bisection, replay_steps
from ss2nc.config import resolve
from ss2nc.directions import min_eigenpair, nc_direction
from ss2nc.oracles import OracleConfig, RngStream, sample_f, sample_g, sample_H
from ss2nc.problems import rosenbrock_2d
from ss2nc.runner import cmd_audit, cmd_compare, cmd_run, cmd_sweep, load_dir, run_dirs
from ss2nc.solver import SolverParams, replay_step_sizes
from ss2nc.theory import lemma_floors
from ss2nc.traces import read_trace

EPS_F = 1e-3
SEEDS = "0:10"
TIMES = {}


@pytest.fixture(scope="session")
def workdir(tmp_path_factory):
    path = tmp_path_factory.mktemp("acceptance")
    yield path
    shutil.rmtree(path, ignore_errors=True)


def timed(name, fn):
    t0 = time.perf_counter()
    out = fn()
    TIMES[name] = time.perf_counter() - t0
    return out


def paper_noise(eps_f=EPS_F):
    return {"oracle.eps_f": eps_f, "oracle.scaling": "paper", "solver.e_f_factor": 2}


# ----------------------------------------------------------------------------
# experiments shared between criteria


def audit_flat():
    oc = OracleConfig(eps_f=EPS_F, eps_g=EPS_F ** 0.5, eps_H=EPS_F ** (1 / 3),
                      eps_lambda=EPS_F ** (1 / 3))
    base = SolverParams(e_f=2 * EPS_F, c_g=0.5, c_H=0.5)
    fg, fH, fl = lemma_floors(base, oc)
    return {**paper_noise(), "oracle.p_g": 1.0, "oracle.p_H": 1.0,
            "solver.c_g": 0.5, "solver.c_H": 0.5, "solver.epsbar_g": fg,
            "solver.epsbar_H": fH, "solver.epsbar_lambda": fl,
            "solver.halt_at_stationary": False, "budget.max_iters": 5000,
            "problem.name": "rosenbrock2", "seeds": SEEDS}


@pytest.fixture(scope="session")
def audit_run(workdir):
    cfg = resolve(audit_flat())
    return timed("audit", lambda: cmd_run(cfg, workdir / "c4", jobs=1))


@pytest.fixture(scope="session")
def deterministic_run(workdir):
    cfg = resolve({"solver.epsbar_g": 1e-6, "budget.max_iters": 50_000, "seeds": 0})
    return cmd_run(cfg, workdir / "c5")


@pytest.fixture(scope="session")
def eps_f_sweep(workdir):
    flat = {**paper_noise(), "solver.halt_at_stationary": False, "budget.max_iters": 20_000,
            "seeds": SEEDS, "sweep.oracle.eps_f": [0.0, 1e-8, 1e-5, 1e-3, 1e-2]}
    return timed("eps_f", lambda: cmd_sweep(resolve(flat), workdir / "c6"))


@pytest.fixture(scope="session")
def e_f_sweep(workdir):
    flat = {**paper_noise(), "solver.halt_at_stationary": False, "budget.max_iters": 5000,
            "report.terminal_window": 500, "report.alpha_checkpoint": 100,
            "seeds": SEEDS, "sweep.solver.e_f_factor": [0.25, 2, 16, 128]}
    return cmd_sweep(resolve(flat), workdir / "c7")


@pytest.fixture(scope="session")
def saddle_compare(workdir):
    # exact gradients: SS-G has no gradient noise to push it off the saddle
    flat = {"problem.name": "saddle_quartic", "oracle.eps_f": EPS_F, "oracle.eps_g": 0.0,
            "oracle.eps_H": EPS_F ** (1 / 3), "oracle.eps_lambda": EPS_F ** (1 / 3),
            "solver.e_f_factor": 2, "solver.halt_at_stationary": False,
            "budget.max_fevals": 2000, "budget.max_iters": 2000, "seeds": SEEDS,
            "methods": ["SS2-NC-G", "SS-NC-CG", "SS-G"]}
    return cmd_compare(resolve(flat), workdir / "c8")


def medians(cell, method, key):
    sums, _ = cell.by_method(method)
    return float(np.median([s[key] for s in sums]))


# ----------------------------------------------------------------------------
# 1-3: contract suites


def test_c01_oracle_contracts(criterion):
    P = rosenbrock_2d()
    x = np.array([0.3, -0.7])
    t0 = time.perf_counter()

    rng = RngStream(101)
    cfg = OracleConfig(eps_f=EPS_F)
    bounded = sum(sample_f(P, x, cfg, rng)[1].error_magnitude > EPS_F for _ in range(10 ** 6))

    a, eps, n = 10.0, 1e-2, 10 ** 6
    rng = RngStream(102)
    cfg = OracleConfig(zeroth_model="subexponential", eps_f=eps, subexp_a=a)
    errs = np.array([sample_f(P, x, cfg, rng)[1].error_magnitude for _ in range(n)])
    tail_bad = 0
    for s in [eps + k / a for k in range(1, 6)]:
        bound = math.exp(-a * (s - eps))
        tail_bad += (errs >= s).mean() > bound + binomial_slack(bound, n)

    rng = RngStream(103)
    cfg = OracleConfig(eps_g=0.05, p_g=1.0)
    ball = 0
    for _ in range(10 ** 5):
        est, t = sample_g(P, x, cfg, rng)
        ball += (np.linalg.norm(est - P.eval_grad(x)) > 0.05) or not t.accurate_flag

    rng = RngStream(104)
    cfg = OracleConfig(eps_H=0.1, p_H=1.0)
    true = P.eval_hess(x)
    spec = sum(np.linalg.norm(sample_H(P, x, cfg, rng)[0] - true, 2) > 0.1 * (1 + 1e-12)
               for _ in range(10 ** 4))
    elapsed = time.perf_counter() - t0

    ok = bounded == 0 and tail_bad == 0 and ball == 0 and spec == 0 and elapsed <= 60
    criterion(1, ok, f"bounded {bounded}, tail {tail_bad}/5, ball {ball}, spectral {spec} "
                     f"violations; {elapsed:.1f}s (limit 60s)")
    assert ok


def test_c02_definition_one(criterion):
    rng = np.random.default_rng(20)
    bad = total = 0
    for gamma in (0.5, 0.9, 1.0):
        for delta in (0.5, 1.0, 2.0):
            done = 0
            while done < 100:
                n = int(rng.integers(2, 7))
                A = rng.standard_normal((n, n))
                A = (A + A.T) / 2
                lam = lambda_min_bisection(A)
                if lam >= 0:
                    continue
                d = nc_direction(A, min_eigenpair(A), gamma, delta)
                qq = float(d.q @ d.q)
                target = gamma * lam * qq
                q1 = target < 0 and float(d.q @ A @ d.q) <= target + 1e-10 * abs(target)
                q2 = math.isclose(math.sqrt(qq), delta * abs(lam), rel_tol=1e-10)
                bad += not (q1 and q2)
                done += 1
                total += 1
    criterion(2, bad == 0, f"{bad} violations over {total} matrices, 9 (gamma, delta) pairs")
    assert bad == 0


def test_c03_eigensolver_vs_bisection(criterion):
    rng = np.random.default_rng(30)
    worst = 0.0
    for _ in range(50):
        A = rng.standard_normal((5, 5))
        A = (A + A.T) / 2
        worst = max(worst, abs(min_eigenpair(A).lambda_min - lambda_min_bisection(A)))
    criterion(3, worst <= 1e-9, f"max |lambda - bisection| = {worst:.2e} (tol 1e-9)")
    assert worst <= 1e-9


# ----------------------------------------------------------------------------
# 4-8: experiments


def test_c04_lemma_audit(criterion, audit_run):
    t0 = time.perf_counter()
    rep = cmd_audit(audit_run.out_dir)[audit_run.out_dir]
    elapsed = TIMES["audit"] + time.perf_counter() - t0
    counts = rep.violations
    ok = all(v == 0 for v in counts.values()) and len(counts) == 5 and elapsed <= 300
    criterion(4, ok, f"violations {counts} over {rep.iterations_audited} iterations; "
                     f"{elapsed:.0f}s (limit 300s)")
    assert ok


def test_c05_deterministic_reduction(criterion, deterministic_run):
    recs = read_trace(deterministic_run.out_dir / "SS2-NC-G_s0.csv")
    hit = next((r.k for r in recs if r.grad_true_norm <= 1e-6), None)
    mono = sum(r.f_next_true > r.f_true for r in recs if r.theta_g or r.theta_H)
    stuck = sum(r.f_next_true != r.f_true for r in recs if not (r.theta_g or r.theta_H))
    ok = hit is not None and hit <= 50_000 and mono == 0 and stuck == 0
    criterion(5, ok, f"||grad|| <= 1e-6 at iteration {hit} (limit 50000); "
                     f"{mono} monotonicity violations")
    assert ok


def test_c06_eps_f_sweep(criterion, eps_f_sweep):
    med = [medians(c, "SS2-NC-G", "best_grad_norm") for c in eps_f_sweep.cells]
    nondecreasing = all(a <= b for a, b in zip(med, med[1:]))
    strict = max(med[0], med[1]) < min(med[3], med[4])
    ok = nondecreasing and strict and TIMES["eps_f"] <= 900
    levels = ", ".join(f"{e:g}: {m:.3g}" for e, m in zip([0, 1e-8, 1e-5, 1e-3, 1e-2], med))
    criterion(6, ok, f"median best grad norm by eps_f {{{levels}}}; "
                     f"{TIMES['eps_f']:.0f}s (limit 900s)")
    assert ok


def test_c07_e_f_sweep(criterion, e_f_sweep):
    cells = e_f_sweep.cells
    term = [medians(c, "SS2-NC-G", "terminal_f_mean") for c in cells]
    alpha = [medians(c, "SS2-NC-G", "accepted_alpha_at_checkpoint") for c in cells]
    term_ok = all(a <= b for a, b in zip(term[1:], term[2:]))
    alpha_ok = all(a <= b for a, b in zip(alpha, alpha[1:]))
    ok = term_ok and alpha_ok
    fmt = lambda vals: ", ".join(f"{k:g}: {v:.3g}" for k, v in zip([0.25, 2, 16, 128], vals))
    criterion(7, ok, f"terminal f {'ok' if term_ok else 'NOT monotone'} {{{fmt(term)}}}; "
                     f"accepted alpha at k=100 {'ok' if alpha_ok else 'NOT monotone'} "
                     f"{{{fmt(alpha)}}}")
    assert ok


def test_c08_saddle_escape(criterion, saddle_compare):
    cell = saddle_compare.cells[0]
    m = {name: medians(cell, name, "final_f_true") for name in ("SS2-NC-G", "SS-NC-CG", "SS-G")}
    # the budget is checked before each iteration, so the last one may finish past it
    used = max(s["feval_count"] for s in cell.summaries)
    ok = m["SS2-NC-G"] <= -0.2 and m["SS-NC-CG"] <= -0.2 and m["SS-G"] >= -1e-3 \
        and cell.config.solver.max_fevals == 2000
    criterion(8, ok, "median final f " + ", ".join(f"{k} {v:.4g}" for k, v in m.items())
              + f"; feval budget 2000 (most used {used})")
    assert ok


# ----------------------------------------------------------------------------
# 9-10: replay and determinism over the artifacts above


def test_c09_step_size_replay(criterion, audit_run, deterministic_run, eps_f_sweep,
                              e_f_sweep, saddle_compare):
    traces = mismatched = 0
    for report in (audit_run, deterministic_run, eps_f_sweep, e_f_sweep, saddle_compare):
        for d in run_dirs(report.out_dir):
            ld = load_dir(d)
            p = ld.params
            for run in ld.runs:
                method = run.summary["method"]
                logged = [(r.alpha_k, r.beta_k, r.alpha_next, r.beta_next) for r in run.records]
                ours = replay_steps(run.records, method, p.alpha0, p.beta0, p.tau)
                pkg = replay_step_sizes(run.records, method, p.alpha0, p.beta0, p.tau)
                mismatched += (logged != ours) or (logged != pkg)
                traces += 1
    criterion(9, mismatched == 0, f"{mismatched} of {traces} traces differ from the replay")
    assert mismatched == 0 and traces == 10 + 1 + 50 + 40 + 30


def test_c10_determinism(criterion, audit_run, workdir):
    again = cmd_run(resolve({**audit_flat(), "seeds": 0}), workdir / "c10")
    a = (audit_run.out_dir / "SS2-NC-G_s0.csv").read_bytes()
    b = (again.out_dir / "SS2-NC-G_s0.csv").read_bytes()
    criterion(10, a == b, f"rerun of seed 0 byte-identical: {a == b} ({len(a)} bytes)")
    assert a == b
