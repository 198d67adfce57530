"""Closed-form constants, parameter checks and empirical audits.

Nothing here feeds back into the solvers.  The constants are diagnostics:
step-size thresholds below which accurate, large-enough steps must succeed,
decrease functions, and neighborhood sizes.  :func:`lemma_audit` replays
finished runs and counts iterations that contradict the per-iteration
guarantees of the bounded-noise analysis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleParametersError
from .oracles import OracleConfig, ZerothModel
from .solver import SolverParams, is_stationary


def kappa_g_prime(eta: float, kappa_g: float) -> float:
    """Effective relative gradient error once the absolute term is absorbed."""
    if not (0 < eta < 1 and 0 <= kappa_g < 1):
        raise ValueError(f"need eta in (0, 1) and kappa_g in [0, 1), got {eta}, {kappa_g}")
    a = (1 - eta) * (1 - kappa_g)
    return 1 - 2 * a / (1 + kappa_g + a)


def alpha_bar(L_g: float, c_d: float, kappa_g_prime: float) -> float:
    value = 2 * (1 / (1 + kappa_g_prime) - c_d) / L_g
    if not value > 0:
        raise InfeasibleParametersError(
            f"alpha_bar = {value} <= 0: need c_d < 1/(1 + kappa_g') = {1 / (1 + kappa_g_prime)}")
    return value


def beta_bar(L_H: float, gamma: float, kappa_H: float, c_p: float, delta: float) -> float:
    value = 3 * (gamma - kappa_H - 2 * c_p * gamma) / (2 * delta * L_H)
    if not value > 0:
        raise InfeasibleParametersError(
            f"beta_bar = {value} <= 0: need gamma - kappa_H - 2 c_p gamma > 0")
    return value


def h_d(alpha, params: SolverParams, include_c_d=True):
    """Guaranteed decrease of an accurate successful descent step.

    ``include_c_d=True`` gives ``c_d c_g^2 epsbar_g^2 alpha``, the amount the
    Armijo test actually certifies; ``False`` is the shorter form without
    ``c_d``.
    """
    base = params.c_g ** 2 * params.epsbar_g ** 2 * alpha
    return params.c_d * base if include_c_d else base


def h_p(beta, params: SolverParams, include_gamma_delta=True):
    """Guaranteed decrease of a successful curvature step.

    With ``include_gamma_delta`` the bound is
    ``c_p gamma delta^2 c_H^3 max(epsbar_H, epsbar_lambda)^3 beta^2``.
    """
    m = max(params.epsbar_H, params.epsbar_lambda)
    base = params.c_p * params.c_H ** 3 * m ** 3 * beta ** 2
    return base * params.gamma * params.delta ** 2 if include_gamma_delta else base


def _safe_div(num, den):
    if num == 0:
        return 0.0
    return num / den if den > 0 else math.inf


def lemma_floors(params: SolverParams, ocfg: OracleConfig):
    """Smallest admissible (epsbar_g, epsbar_H, epsbar_lambda) for the
    per-iteration guarantees."""
    p, o = params, ocfg
    den_g = min(p.eta * p.c_g * (1 - o.kappa_g), 1 - o.kappa_g - p.c_g)
    floor_g = _safe_div(2 * o.eps_g, den_g)
    margin = p.delta * (p.gamma - o.kappa_H - 2 * p.c_p * p.gamma)
    if o.eps_H == 0:
        floor_H = 0.0
    elif p.c_H > 0 and margin > 0:
        floor_H = o.eps_H / p.c_H * math.sqrt(2 / margin)
    else:
        floor_H = math.inf
    floor_lam = _safe_div(o.eps_lambda, 1 - o.kappa_lambda - p.c_H)
    return floor_g, floor_H, floor_lam


@dataclass
class TheoryConstants:
    kappa_g_prime: float
    alpha_bar: float
    beta_bar: float
    h_d_at_alpha_bar: float
    h_p_at_beta_bar: float
    c_alpha_beta: float
    c_alpha_beta_lemma: float
    c_tau: float
    eps_c: float
    neighborhood_floor_g: float
    neighborhood_floor_H: float
    neighborhood_floor_lambda: float
    lemma_floor_g: float
    lemma_floor_H: float
    lemma_floor_lambda: float
    issues: list = field(default_factory=list)


def compute_constants(problem, params: SolverParams, ocfg: OracleConfig,
                      pbar_g=None, pbar_H=None, s=0.0) -> TheoryConstants:
    """All closed-form quantities for one configuration.

    Infeasible pieces become ``nan`` and are explained in ``issues`` rather
    than clamped.  ``pbar_g``/``pbar_H`` default to ``p - 0.01``; ``s`` is the
    tail allowance entering the subexponential noise floor.
    """
    p, o = params, ocfg
    issues = []
    pbar_g = o.p_g - 0.01 if pbar_g is None else pbar_g
    pbar_H = o.p_H - 0.01 if pbar_H is None else pbar_H
    nan = math.nan

    try:
        kp = kappa_g_prime(p.eta, o.kappa_g)
    except ValueError as exc:
        kp = nan
        issues.append(str(exc))
    try:
        a_bar = alpha_bar(problem.lipschitz_g, p.c_d, kp) if not math.isnan(kp) else nan
    except InfeasibleParametersError as exc:
        a_bar = nan
        issues.append(str(exc))
    try:
        b_bar = beta_bar(problem.lipschitz_h, p.gamma, o.kappa_H, p.c_p, p.delta)
    except InfeasibleParametersError as exc:
        b_bar = nan
        issues.append(str(exc))

    m = max(p.epsbar_H, p.epsbar_lambda)
    hd = h_d(a_bar, p, include_c_d=False)
    hp = h_p(b_bar, p, include_gamma_delta=True)
    c_ab = min(p.c_d * a_bar * p.c_g ** 2 * p.epsbar_g ** 2,
               p.c_p * b_bar ** 2 * p.c_H ** 3 * m ** 3)
    c_ab_lemma = min(hd, hp)

    def log_tau(z):
        return math.log(z) / math.log(p.tau)

    if math.isnan(a_bar) or math.isnan(b_bar):
        c_tau = nan
    else:
        c_tau = max(log_tau(a_bar / p.alpha0), log_tau(b_bar / p.beta0), 0.0)

    if o.zeroth_model is ZerothModel.BOUNDED:
        eps_c = 16 * o.eps_f
    else:
        eps_c = 16 * o.eps_f + 32 / o.subexp_a + 4 * s
    c_gH = pbar_g * pbar_H + pbar_g + pbar_H - 2
    lf_g, lf_H, lf_lam = lemma_floors(p, o)
    if c_gH > 0:
        def root(den, power):
            return _safe_div(eps_c, den) ** power if not math.isnan(den) else nan
        noise_g = root(c_gH * p.c_d * a_bar * p.c_g ** 2, 0.5)
        noise_H = root(c_gH * p.c_p * b_bar ** 2 * p.c_H ** 3, 1 / 3)
        floor_g, floor_H, floor_lam = (max(noise_g, lf_g), max(noise_H, lf_H),
                                       max(noise_H, lf_lam))
    else:
        issues.append(f"pbar_g pbar_H + pbar_g + pbar_H - 2 = {c_gH} <= 0")
        floor_g = floor_H = floor_lam = nan

    return TheoryConstants(
        kappa_g_prime=kp, alpha_bar=a_bar, beta_bar=b_bar,
        h_d_at_alpha_bar=hd, h_p_at_beta_bar=hp,
        c_alpha_beta=c_ab, c_alpha_beta_lemma=c_ab_lemma, c_tau=c_tau, eps_c=eps_c,
        neighborhood_floor_g=floor_g, neighborhood_floor_H=floor_H,
        neighborhood_floor_lambda=floor_lam,
        lemma_floor_g=lf_g, lemma_floor_H=lf_H, lemma_floor_lambda=lf_lam,
        issues=issues)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    kind: str  # "range" failures are warnings; "regime" failures are informational
    detail: str


@dataclass
class ParamReport:
    checks: list

    @property
    def warnings(self):
        return [c for c in self.checks if c.kind == "range" and not c.passed]

    @property
    def ok(self):
        return not self.warnings

    def failed(self, name):
        return any(c.name == name and not c.passed for c in self.checks)

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'} [{c.kind}] {c.name}: {c.detail}"
                for c in self.checks]


def validate_params(params: SolverParams, ocfg: OracleConfig) -> ParamReport:
    """Check the admissible parameter ranges and noise-floor conditions.

    ``c_g = 0`` and ``c_H = 0`` are accepted: they switch the corresponding
    early-termination test off.  The epsbar floor checks are reported with
    kind ``"regime"`` because experiments routinely run outside them.
    """
    p, o = params, ocfg
    checks = []

    def add(name, passed, kind, detail):
        checks.append(Check(name, bool(passed), kind, detail))

    cd_max = 0.5 + (1 - p.eta) * (1 - o.kappa_g) / (2 * (1 + o.kappa_g))
    add("c_d", 0 < p.c_d < cd_max, "range", f"0 < c_d={p.c_d} < {cd_max:.6g}")
    add("eta", 0 < p.eta < 1, "range", f"0 < eta={p.eta} < 1")
    add("c_g", 0 <= p.c_g < 1 - o.kappa_g, "range",
        f"0 <= c_g={p.c_g} < 1 - kappa_g = {1 - o.kappa_g:.6g}")
    add("kappa_H", 0 <= o.kappa_H < p.gamma <= 1, "range",
        f"0 <= kappa_H={o.kappa_H} < gamma={p.gamma} <= 1")
    cp_max = (p.gamma - o.kappa_H) / (2 * p.gamma)
    add("c_p", 0 < p.c_p < cp_max, "range", f"0 < c_p={p.c_p} < {cp_max:.6g}")
    add("c_H", 0 <= p.c_H < 1 - o.kappa_lambda, "range",
        f"0 <= c_H={p.c_H} < 1 - kappa_lambda = {1 - o.kappa_lambda:.6g}")
    if o.zeroth_model is ZerothModel.BOUNDED:
        need = 2 * o.eps_f
        add("e_f", p.e_f >= need, "range", f"e_f={p.e_f} >= 2 eps_f = {need:.6g}")
    else:
        need = 2 * o.eps_f + 5 / o.subexp_a
        add("e_f", p.e_f >= need, "range", f"e_f={p.e_f} >= 2 eps_f + 5/a = {need:.6g}")

    lf_g, lf_H, lf_lam = lemma_floors(p, o)
    if p.c_g > 0:
        add("epsbar_g", p.epsbar_g >= lf_g, "regime", f"epsbar_g={p.epsbar_g} >= {lf_g:.6g}")
    else:
        add("epsbar_g", True, "regime", "descent early termination disabled (c_g = 0)")
    add("epsbar_H", p.epsbar_H >= lf_H, "regime", f"epsbar_H={p.epsbar_H} >= {lf_H:.6g}")
    add("epsbar_lambda", p.epsbar_lambda >= lf_lam, "regime",
        f"epsbar_lambda={p.epsbar_lambda} >= {lf_lam:.6g}")
    return ParamReport(checks)


def stopping_time(records, epsbar_g, epsbar_H, epsbar_lambda):
    """First iteration index whose true iterate meets the stationarity targets."""
    for rec in records:
        if is_stationary(rec.grad_true_norm, rec.lambda_true, epsbar_g, epsbar_H, epsbar_lambda):
            return rec.k
    return None


@dataclass(frozen=True)
class TailCurve:
    t: np.ndarray
    prob: np.ndarray
    stderr: np.ndarray
    n_runs: int


def tail_estimate(results, t_grid) -> TailCurve:
    """Empirical survival curve ``P[N > t]``; runs that never stop count as exceeding every t."""
    results = list(results)
    if len(results) < 2:
        raise ValueError(f"tail estimate needs at least 2 runs, got {len(results)}")
    t = np.asarray(list(t_grid), dtype=float)
    stops = np.array([math.inf if r.stopping_time is None else r.stopping_time
                      for r in results])
    prob = (stops[None, :] > t[:, None]).mean(axis=1)
    stderr = np.sqrt(prob * (1 - prob) / len(results))
    return TailCurve(t, prob, stderr, len(results))


def stopping_time_rank_test(low_noise, high_noise, horizon):
    """One-sided Mann-Whitney p-value for "high-noise runs stop earlier".

    Never-stopping runs are ranked at ``horizon + 1``.  A small p-value is
    evidence against the survival curves growing with noise.
    """
    from scipy.stats import mannwhitneyu

    def times(rs):
        return [horizon + 1 if r.stopping_time is None else r.stopping_time for r in rs]

    return float(mannwhitneyu(times(high_noise), times(low_noise), alternative="less").pvalue)


@dataclass
class AuditReport:
    violations: dict
    extra: dict
    iterations_audited: int
    frequencies: list

    @property
    def total(self):
        return sum(self.violations.values())


def lemma_audit(results, constants: TheoryConstants, ocfg: OracleConfig,
                params: SolverParams) -> AuditReport:
    """Count per-iteration guarantee violations over iterations before the stopping time.

    Primary counts ``i``-``v`` use the indicator form of the Hessian accuracy
    flag and the decrease functions certified by the Armijo tests.  ``extra``
    holds the alternative readings (oracle-form Hessian flag, decrease
    functions without ``c_d`` or without ``gamma delta^2``) and the 2 e_f
    half-step bounds.
    """
    p = params
    a_bar, b_bar, e_f = constants.alpha_bar, constants.beta_bar, p.e_f
    v = dict.fromkeys(("i", "ii", "iii", "iv", "v"), 0)
    extra = dict.fromkeys(("ii_oracle_form", "iii_without_c_d", "iv_without_gamma_delta",
                           "descent_half_2ef", "nc_half_2ef"), 0)
    audited = 0
    freqs = []
    for res in results:
        recs = res.records
        N = stopping_time(recs, p.epsbar_g, p.epsbar_H, p.epsbar_lambda)
        upto = recs if N is None else recs[:N]
        for r in upto:
            audited += 1
            if r.i_g and r.omega_g and r.alpha_k <= a_bar and not r.theta_g:
                v["i"] += 1
            if r.i_H_sq and r.omega_H and r.beta_k <= b_bar and not r.theta_H:
                v["ii"] += 1
            if r.i_H and r.omega_H and r.beta_k <= b_bar and not r.theta_H:
                extra["ii_oracle_form"] += 1
            if r.i_g and r.omega_g and r.theta_g:
                if r.f_next_true > r.f_true - h_d(r.alpha_k, p) + 4 * e_f:
                    v["iii"] += 1
                if r.f_next_true > r.f_true - h_d(r.alpha_k, p, include_c_d=False) + 4 * e_f:
                    extra["iii_without_c_d"] += 1
            if r.i_H_sq and r.omega_H and r.theta_H:
                if r.f_next_true > r.f_true - h_p(r.beta_k, p) + 4 * e_f:
                    v["iv"] += 1
                if r.f_next_true > r.f_true - h_p(r.beta_k, p, include_gamma_delta=False) + 4 * e_f:
                    extra["iv_without_gamma_delta"] += 1
            if r.i_g and not r.omega_g and r.i_H_sq and not r.omega_H:
                v["v"] += 1
            if r.omega_g and r.theta_g and r.f_hat_true > r.f_true + 2 * e_f:
                extra["descent_half_2ef"] += 1
            if r.omega_H and r.theta_H and r.f_next_true > r.f_hat_true + 2 * e_f:
                extra["nc_half_2ef"] += 1
        n = max(len(recs), 1)
        freqs.append({name: sum(bool(getattr(r, name)) for r in recs) / n
                      for name in ("i_f", "ihat_f", "i_g", "i_H", "i_H_sq")})
    return AuditReport(v, extra, audited, freqs)
