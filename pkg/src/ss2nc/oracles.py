"""Simulated probabilistic zeroth-, first- and second-order oracles.

All randomness flows through :class:`RngStream`, which owns three PCG64
generators (function, gradient, Hessian) derived from ``(seed, stream_id)``
through numpy's ``SeedSequence``.  Both algorithms are documented and
platform independent, so equal ``(seed, stream_id)`` pairs reproduce the
same draws everywhere.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .problems import ProblemSpec


class ZerothModel(str, enum.Enum):
    BOUNDED = "bounded"
    SUBEXPONENTIAL = "subexponential"


@dataclass(frozen=True)
class OracleConfig:
    zeroth_model: ZerothModel = ZerothModel.BOUNDED
    eps_f: float = 0.0
    subexp_a: float = 1.0
    p_g: float = 1.0
    eps_g: float = 0.0
    kappa_g: float = 0.0
    p_H: float = 1.0
    eps_H: float = 0.0
    kappa_H: float = 0.0
    eps_lambda: float = 0.0
    kappa_lambda: float = 0.0
    failure_scale: float = 10.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "zeroth_model", ZerothModel(self.zeroth_model))
        except ValueError:
            raise ConfigError(f"unknown zeroth-order model {self.zeroth_model!r}",
                              field="zeroth_model") from None
        for name in ("eps_f", "eps_g", "kappa_g", "eps_H", "kappa_H",
                     "eps_lambda", "kappa_lambda"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"must be finite and >= 0, got {value}", field=name)
        for name in ("p_g", "p_H"):
            value = getattr(self, name)
            if not 0.5 < value <= 1.0:
                raise ConfigError(f"must lie in (1/2, 1], got {value}", field=name)
        if self.zeroth_model is ZerothModel.SUBEXPONENTIAL and not self.subexp_a > 0:
            raise ConfigError("subexponential noise needs a > 0", field="subexp_a")
        if not self.failure_scale > 1:
            raise ConfigError("failure multiplier must exceed 1", field="failure_scale")


class RngStream:
    """Per-run random state with one sub-stream per oracle kind."""

    KINDS = ("f", "g", "H")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        root = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        children = root.spawn(len(self.KINDS))
        gens = [np.random.Generator(np.random.PCG64(c)) for c in children]
        self.f, self.g, self.H = gens

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass
class OracleTruth:
    """Ground truth logged next to an oracle draw; never read by the solver."""
    true_value: object
    error_magnitude: float
    accurate_flag: bool | None


def sample_f(problem: ProblemSpec, x, cfg: OracleConfig, rng: RngStream):
    """Noisy function value.

    Bounded: ``f(x) + eps_f * U(-1, 1)``.  Subexponential: ``f(x) + S * M``
    with a fair random sign ``S`` and ``M = eps_f + Exp(a)``, so that
    ``P[M >= s] = exp(-a (s - eps_f))`` for ``s > eps_f``.
    """
    fx = problem.eval_f(x)
    if cfg.zeroth_model is ZerothModel.BOUNDED:
        noise = cfg.eps_f * rng.f.uniform(-1.0, 1.0)
    else:
        sign = -1.0 if rng.f.random() < 0.5 else 1.0
        noise = sign * (cfg.eps_f + rng.f.exponential(1.0 / cfg.subexp_a))
    estimate = fx + noise
    err = abs(estimate - fx)
    return estimate, OracleTruth(fx, err, err <= cfg.eps_f)


def _unit_direction(gen, n):
    r = gen.standard_normal(n)
    return r / np.linalg.norm(r)


def sample_g(problem: ProblemSpec, x, cfg: OracleConfig, rng: RngStream):
    """Gradient estimate drawn uniformly from the accuracy ball w.p. ``p_g``.

    With probability ``1 - p_g`` the perturbation is pushed to
    ``failure_scale`` times the ball radius.  The returned accuracy flag
    reflects the realized inequality, not the branch taken.
    """
    grad = problem.eval_grad(x)
    n = grad.shape[0]
    radius = cfg.eps_g + cfg.kappa_g * float(np.linalg.norm(grad))
    accurate_branch = rng.g.random() < cfg.p_g
    u = _unit_direction(rng.g, n)
    U = rng.g.random()
    if accurate_branch:
        rho = radius * U ** (1.0 / n)
    else:
        rho = cfg.failure_scale * radius
    estimate = grad + rho * u
    err = float(np.linalg.norm(estimate - grad))
    return estimate, OracleTruth(grad, err, err <= radius)


def sample_H(problem: ProblemSpec, x, cfg: OracleConfig, rng: RngStream):
    """Symmetric Hessian estimate with spectral-norm error at most ``eps_H``
    on the accurate branch (probability ``p_H``).

    The accuracy flag is left as ``None``: the second-order accuracy event
    depends on the negative curvature direction, see :func:`hessian_accuracy`.
    """
    H = problem.eval_hess(x)
    n = H.shape[0]
    accurate_branch = rng.H.random() < cfg.p_H
    G = rng.H.standard_normal((n, n))
    S = (G + G.T) / 2.0
    u = S / np.linalg.norm(S, 2)
    U = rng.H.random()
    if accurate_branch:
        rho = cfg.eps_H * U ** (1.0 / n ** 2)
    else:
        rho = cfg.failure_scale * cfg.eps_H
    estimate = H + rho * u
    err = float(np.linalg.norm(estimate - H, 2))
    return estimate, OracleTruth(H, err, None)


def hessian_accuracy(true_hess, estimate, lambda_est, lambda_true, q, cfg: OracleConfig,
                     squared_eps=False):
    """Evaluate the second-order accuracy event for a realized draw.

    The directional condition ``|(true - est) q| <= eps + kappa_H |lambda_est| |q|``
    uses ``eps = eps_H`` (oracle form) or ``eps_H**2`` (indicator form, selected
    by ``squared_eps``).  It is vacuous when no curvature direction exists
    (``q is None``); the eigenvalue condition is always checked.
    """
    eps = cfg.eps_H ** 2 if squared_eps else cfg.eps_H
    ok = abs(lambda_true - lambda_est) <= cfg.eps_lambda + cfg.kappa_lambda * abs(lambda_true)
    if q is not None:
        qn = float(np.linalg.norm(q))
        lhs = float(np.linalg.norm((true_hess - estimate) @ q))
        ok = ok and lhs <= eps + cfg.kappa_H * abs(lambda_est) * qn
    return bool(ok)
