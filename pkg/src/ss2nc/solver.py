"""Step-search solvers driven by the simulated oracles.

``run_ss2_nc_g`` alternates a gradient descent step and a negative
curvature step per iteration, each with its own step size sequence and a
relaxed Armijo test.  ``run_ss_g`` keeps only the descent step and
``run_ss_nc_cg`` picks a Newton-type or curvature step from capped CG with a
single shared step size.

Every iteration yields an :class:`IterationRecord` holding both what the
solver saw and the ground truth behind it.  Truth fields feed the audits
only; the control flow never reads them.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .directions import CGKind, capped_cg, min_eigenpair, nc_direction
from .errors import ConfigError, DivergenceError
from .oracles import (OracleConfig, RngStream, hessian_accuracy, sample_f, sample_g,
                      sample_H)
from .problems import ProblemSpec

DIVERGENCE_NORM = 1e8


class Method(str, enum.Enum):
    SS2_NC_G = "SS2-NC-G"
    SS_G = "SS-G"
    SS_NC_CG = "SS-NC-CG"


class Status(str, enum.Enum):
    HIT_STOPPING_TIME = "HitStoppingTime"
    BUDGET_EXHAUSTED = "BudgetExhausted"


@dataclass(frozen=True)
class SolverParams:
    alpha0: float = 1.0
    beta0: float = 1.0
    tau: float = 0.5
    c_d: float = 0.2
    c_p: float = 0.2
    c_g: float = 0.0
    c_H: float = 0.5
    e_f: float = 0.0
    epsbar_g: float = 0.0
    epsbar_H: float = 2e-3
    epsbar_lambda: float = 2e-3
    gamma: float = 0.9
    delta: float = 1.0
    eta: float = 0.5
    max_iters: int = 1000
    max_fevals: Optional[int] = None
    halt_at_stationary: bool = True
    eps_cap: float = 1e-3

    def __post_init__(self):
        def bad(name, why):
            raise ConfigError(f"{why}, got {getattr(self, name)!r}", field=name)

        for name in ("alpha0", "beta0", "delta", "eps_cap"):
            if not (math.isfinite(getattr(self, name)) and getattr(self, name) > 0):
                bad(name, "must be finite and > 0")
        if not 0 < self.tau < 1:
            bad("tau", "must lie in (0, 1)")
        for name in ("c_d", "c_p", "eta"):
            if not 0 < getattr(self, name) < 1:
                bad(name, "must lie in (0, 1)")
        if not 0 < self.gamma <= 1:
            bad("gamma", "must lie in (0, 1]")
        for name in ("c_g", "c_H", "e_f", "epsbar_g", "epsbar_H", "epsbar_lambda"):
            value = getattr(self, name)
            if math.isnan(value) or value < 0:
                bad(name, "must be >= 0")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            bad("max_iters", "budget must be a positive integer")
        if self.max_fevals is not None and (int(self.max_fevals) != self.max_fevals
                                            or self.max_fevals < 1):
            bad("max_fevals", "budget must be a positive integer or None")

    @property
    def nc_threshold(self):
        return self.c_H * max(self.epsbar_H, self.epsbar_lambda)


@dataclass
class IterationRecord:
    k: int
    fevals_so_far: int  # cumulative, including this iteration
    gevals_so_far: int
    hevals_so_far: int
    x: np.ndarray
    f_true: float
    grad_true_norm: float
    lambda_true: float
    g_est_norm: float
    descent_slope: float  # d_k^T g_k, nan when no descent trial
    F_est: float
    F_plus: float
    f_hat_true: float
    lambda_hat_true: float  # lambda_min of the true Hessian where H_k was sampled
    lambda_est: float
    curvature: float  # q_k^T H_k q_k
    F_hat: float
    F_hat_plus: float
    F_hat_minus: float
    f_next_true: float
    alpha_k: float
    beta_k: float
    alpha_next: float
    beta_next: float
    omega_g: bool
    omega_H: bool
    theta_g: bool
    theta_H: bool
    i_f: bool
    i_g: bool
    ihat_f: bool
    i_H: bool
    i_H_sq: bool
    sign_choice: Optional[int]


RECORD_FIELDS = tuple(f.name for f in fields(IterationRecord))


@dataclass
class RunResult:
    method: Method
    records: list = field(default_factory=list)
    stopping_time: Optional[int] = None
    status: Status = Status.BUDGET_EXHAUSTED
    feval_count: int = 0
    geval_count: int = 0
    heval_count: int = 0
    x_final: Optional[np.ndarray] = None


def is_stationary(grad_norm, lambda_min, epsbar_g, epsbar_H, epsbar_lambda):
    return grad_norm <= epsbar_g and lambda_min >= -max(epsbar_lambda, epsbar_H)


def _lambda_min_true(problem, x):
    return float(np.linalg.eigvalsh(problem.eval_hess(x))[0])


class _Run:
    """Mutable state of a single run: iterate, step sizes, counters."""

    def __init__(self, method, problem, ocfg, params, x0, rng):
        self.method = Method(method)
        self.problem = problem
        self.ocfg = ocfg
        self.params = params
        self.rng = rng
        self.x = np.array(x0, dtype=float)
        if self.x.shape != (problem.dim,):
            raise ConfigError(f"start point has shape {self.x.shape}, expected ({problem.dim},)",
                              field="x0")
        self.alpha = params.alpha0
        self.beta = params.beta0
        self.fevals = self.gevals = self.hevals = 0
        self.result = RunResult(self.method)

    def f(self, x):
        self.fevals += 1
        return sample_f(self.problem, x, self.ocfg, self.rng)

    def g(self, x):
        self.gevals += 1
        return sample_g(self.problem, x, self.ocfg, self.rng)

    def H(self, x):
        self.hevals += 1
        return sample_H(self.problem, x, self.ocfg, self.rng)

    def descent(self, x, g, d, alpha):
        """Relaxed Armijo trial along ``d``; returns (accepted point, info)."""
        p = self.params
        xt = x + alpha * d
        F, tF = self.f(x)
        Fp, tFp = self.f(xt)
        slope = float(d @ g)
        accepted = Fp <= F + p.c_d * alpha * slope + p.e_f
        info = dict(F_est=F, F_plus=Fp, descent_slope=slope,
                    i_f=tF.error_magnitude + tFp.error_magnitude <= p.e_f,
                    theta_g=bool(accepted))
        if accepted:
            return xt, tFp.true_value, info
        return x, tF.true_value, info

    def curvature_step(self, xhat, q, curvature, step):
        """Two-sided relaxed Armijo test along +-q with sign selection."""
        p = self.params
        xp = xhat + step * q
        xm = xhat - step * q
        Fh, tFh = self.f(xhat)
        Fhp, tFhp = self.f(xp)
        Fhm, tFhm = self.f(xm)
        accepted = min(Fhp, Fhm) <= Fh + p.c_p * step ** 2 * curvature + p.e_f
        info = dict(F_hat=Fh, F_hat_plus=Fhp, F_hat_minus=Fhm,
                    ihat_f=tFh.error_magnitude + max(tFhp.error_magnitude,
                                                     tFhm.error_magnitude) <= p.e_f,
                    theta_H=bool(accepted), sign_choice=None)
        if not accepted:
            return xhat, None, info
        # ties go to +q
        if Fhp <= Fhm:
            info["sign_choice"] = 1
            return xp, tFhp.true_value, info
        info["sign_choice"] = -1
        return xm, tFhm.true_value, info

    def check_finite(self, x, fx):
        if not (np.all(np.isfinite(x)) and np.linalg.norm(x) <= DIVERGENCE_NORM
                and math.isfinite(fx)):
            self.finish(Status.BUDGET_EXHAUSTED)
            raise DivergenceError(
                f"{self.method.value} diverged at iteration {len(self.result.records)}",
                partial=self.result)

    def finish(self, status):
        r = self.result
        r.status = status
        r.feval_count, r.geval_count, r.heval_count = self.fevals, self.gevals, self.hevals
        r.x_final = self.x.copy()
        p = self.params
        for rec in r.records:
            if is_stationary(rec.grad_true_norm, rec.lambda_true,
                             p.epsbar_g, p.epsbar_H, p.epsbar_lambda):
                r.stopping_time = rec.k
                break
        return r

    def loop(self, iteration):
        p = self.params
        for k in range(p.max_iters):
            if p.max_fevals is not None and self.fevals >= p.max_fevals:
                break
            rec = iteration(k)
            self.result.records.append(rec)
            self.check_finite(self.x, rec.f_next_true)
            if p.halt_at_stationary and is_stationary(
                    rec.grad_true_norm, rec.lambda_true,
                    p.epsbar_g, p.epsbar_H, p.epsbar_lambda):
                return self.finish(Status.HIT_STOPPING_TIME)
        return self.finish(Status.BUDGET_EXHAUSTED)

    def blank(self, k, x, fx, grad_norm, lam):
        nan = math.nan
        return dict(k=k, x=x.copy(), f_true=fx, grad_true_norm=grad_norm,
                    lambda_true=lam, g_est_norm=nan, descent_slope=nan, F_est=nan,
                    F_plus=nan, f_hat_true=fx, lambda_hat_true=nan, lambda_est=nan,
                    curvature=nan, F_hat=nan, F_hat_plus=nan, F_hat_minus=nan,
                    alpha_k=self.alpha, beta_k=self.beta, omega_g=False, omega_H=False,
                    theta_g=False, theta_H=False, i_f=True, i_g=False, ihat_f=True,
                    i_H=False, i_H_sq=False, sign_choice=None)

    def close(self, fields_, x_next, f_next):
        self.x = x_next
        fields_.update(f_next_true=f_next, alpha_next=self.alpha, beta_next=self.beta,
                       fevals_so_far=self.fevals, gevals_so_far=self.gevals,
                       hevals_so_far=self.hevals)
        return IterationRecord(**fields_)


def _descent_half(run, rec, x, g):
    """Lines 2-8: early termination test, then the relaxed Armijo trial."""
    p = run.params
    gnorm = float(np.linalg.norm(g))
    rec["g_est_norm"] = gnorm
    if gnorm <= p.c_g * p.epsbar_g:
        return x, rec["f_true"]
    rec["omega_g"] = True
    xhat, fhat, info = run.descent(x, g, -g, run.alpha)
    rec.update(info)
    run.alpha = run.alpha / p.tau if info["theta_g"] else p.tau * run.alpha
    return xhat, fhat


def _curvature_half(run, rec, xhat, fhat):
    """Lines 9-18 at the intermediate point."""
    p = run.params
    H, tH = run.H(xhat)
    eig = min_eigenpair(H)
    lam = eig.lambda_min
    lam_true = float(np.linalg.eigvalsh(tH.true_value)[0])
    rec.update(lambda_est=lam, lambda_hat_true=lam_true)
    q = None
    x_next, f_next = xhat, fhat
    if not lam >= -p.nc_threshold:
        rec["omega_H"] = True
        nc = nc_direction(H, eig, p.gamma, p.delta)
        q = nc.q
        rec["curvature"] = nc.curvature
        xn, fn, info = run.curvature_step(xhat, q, nc.curvature, run.beta)
        rec.update(info)
        if info["theta_H"]:
            x_next, f_next = xn, fn
            run.beta = run.beta / p.tau
        else:
            run.beta = p.tau * run.beta
    rec["i_H"] = hessian_accuracy(tH.true_value, H, lam, lam_true, q, run.ocfg)
    rec["i_H_sq"] = hessian_accuracy(tH.true_value, H, lam, lam_true, q, run.ocfg,
                                     squared_eps=True)
    return x_next, f_next


def _start_iteration(run, k):
    x = run.x
    g, tg = run.g(x)
    fx = run.problem.eval_f(x)
    grad_norm = float(np.linalg.norm(tg.true_value))
    rec = run.blank(k, x, fx, grad_norm, _lambda_min_true(run.problem, x))
    rec["i_g"] = bool(tg.accurate_flag)
    return x, g, rec


def run_ss2_nc_g(problem: ProblemSpec, ocfg: OracleConfig, params: SolverParams, x0,
                 rng: RngStream) -> RunResult:
    """Two-step method: descent step then negative curvature step per iteration."""
    run = _Run(Method.SS2_NC_G, problem, ocfg, params, x0, rng)

    def iteration(k):
        x, g, rec = _start_iteration(run, k)
        xhat, fhat = _descent_half(run, rec, x, g)
        rec["f_hat_true"] = fhat
        x_next, f_next = _curvature_half(run, rec, xhat, fhat)
        return run.close(rec, x_next, f_next)

    return run.loop(iteration)


def run_ss_g(problem: ProblemSpec, ocfg: OracleConfig, params: SolverParams, x0,
             rng: RngStream) -> RunResult:
    """Gradient-only step search (no Hessian oracle calls)."""
    run = _Run(Method.SS_G, problem, ocfg, params, x0, rng)

    def iteration(k):
        x, g, rec = _start_iteration(run, k)
        xhat, fhat = _descent_half(run, rec, x, g)
        rec["f_hat_true"] = fhat
        return run.close(rec, xhat, fhat)

    return run.loop(iteration)


def run_ss_nc_cg(problem: ProblemSpec, ocfg: OracleConfig, params: SolverParams, x0,
                 rng: RngStream, eps_cap: float | None = None) -> RunResult:
    """Capped-CG variant: a Newton-type or a curvature step, one step size.

    Both the ``alpha`` and ``beta`` record columns carry the shared step size.
    """
    eps_cap = params.eps_cap if eps_cap is None else eps_cap
    if not eps_cap > 0:
        raise ConfigError("eps_cap must be > 0", field="eps_cap")
    run = _Run(Method.SS_NC_CG, problem, ocfg, params, x0, rng)
    run.beta = run.alpha
    max_cg = max(2 * problem.dim, 10)
    p = params

    def iteration(k):
        x, g, rec = _start_iteration(run, k)
        rec["g_est_norm"] = float(np.linalg.norm(g))
        H, tH = run.H(x)
        eig = min_eigenpair(H)
        lam_true = rec["lambda_true"]
        rec.update(lambda_est=eig.lambda_min, lambda_hat_true=lam_true)
        out = capped_cg(H, g, eps_cap, max_cg)
        x_next, f_next = x, rec["f_true"]
        q = None
        if out.kind is CGKind.NEWTON_LIKE:
            if np.any(out.direction != 0):
                rec["omega_g"] = True
                x_next, f_next, info = run.descent(x, g, out.direction, run.alpha)
                rec.update(info)
                run.alpha = run.alpha / p.tau if info["theta_g"] else p.tau * run.alpha
        else:
            d = out.direction
            dn = float(np.linalg.norm(d))
            curv_est = float(d @ H @ d) / dn ** 2
            q = (p.delta * abs(curv_est) / dn) * d
            curvature = float(q @ H @ q)
            rec.update(omega_H=True, curvature=curvature)
            xn, fn, info = run.curvature_step(x, q, curvature, run.alpha)
            rec.update(info)
            if info["theta_H"]:
                x_next, f_next = xn, fn
                run.alpha = run.alpha / p.tau
            else:
                run.alpha = p.tau * run.alpha
        run.beta = run.alpha
        rec["f_hat_true"] = f_next
        rec["i_H"] = hessian_accuracy(tH.true_value, H, eig.lambda_min, lam_true, q, run.ocfg)
        rec["i_H_sq"] = hessian_accuracy(tH.true_value, H, eig.lambda_min, lam_true, q,
                                         run.ocfg, squared_eps=True)
        return run.close(rec, x_next, f_next)

    return run.loop(iteration)


RUNNERS = {
    Method.SS2_NC_G: run_ss2_nc_g,
    Method.SS_G: run_ss_g,
    Method.SS_NC_CG: run_ss_nc_cg,
}


def run_method(method, problem, ocfg, params, x0, rng) -> RunResult:
    return RUNNERS[Method(method)](problem, ocfg, params, x0, rng)


def replay_step_sizes(records, method, alpha0, beta0, tau):
    """Rebuild the step size sequences from the success/attempt flags alone.

    Returns a list of ``(alpha_k, beta_k, alpha_next, beta_next)`` tuples, one
    per record, computed without reading any logged step size.
    """
    method = Method(method)
    alpha = alpha0
    beta = alpha0 if method is Method.SS_NC_CG else beta0
    out = []
    for rec in records:
        a0, b0 = alpha, beta
        if method is Method.SS_NC_CG:
            if rec.theta_g or rec.theta_H:
                alpha = alpha / tau
            elif rec.omega_g or rec.omega_H:
                alpha = tau * alpha
            beta = alpha
        else:
            if rec.omega_g:
                alpha = alpha / tau if rec.theta_g else tau * alpha
            if rec.omega_H:
                beta = beta / tau if rec.theta_H else tau * beta
        out.append((a0, b0, alpha, beta))
    return out
