"""Minimum eigenpairs, negative curvature directions and capped CG."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NoNegativeCurvatureError, NumericInputError


@dataclass(frozen=True)
class EigenResult:
    lambda_min: float
    eigvec: np.ndarray
    residual: float


@dataclass(frozen=True)
class NCDirection:
    q: np.ndarray
    gamma: float
    delta: float
    curvature: float


class CGKind(str, enum.Enum):
    NEWTON_LIKE = "NewtonLike"
    NEGATIVE_CURVATURE = "NegativeCurvature"


@dataclass(frozen=True)
class CGOutcome:
    kind: CGKind
    direction: np.ndarray
    iterations: int


def _fix_sign(v):
    # first component that is not numerically zero made positive
    for vi in v:
        if abs(vi) > 1e-12:
            return v if vi > 0 else -v
    return v


def min_eigenpair(H) -> EigenResult:
    """Algebraically smallest eigenvalue of a symmetric matrix and a unit
    eigenvector with a fixed sign convention."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] == 0:
        raise NumericInputError(f"expected a nonempty square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise NumericInputError("matrix has non-finite entries")
    w, V = np.linalg.eigh(H)
    lam = float(w[0])
    v = _fix_sign(V[:, 0].copy())
    residual = float(np.linalg.norm(H @ v - lam * v))
    return EigenResult(lam, v, residual)


def nc_direction(H, eig: EigenResult, gamma: float, delta: float) -> NCDirection:
    """Scaled eigenvector ``q = delta |lambda_min| v``.

    Since ``q^T H q = lambda_min |q|^2`` and ``gamma <= 1``, both the curvature
    inequality and the length condition hold by construction.
    """
    if not eig.lambda_min < 0:
        raise NoNegativeCurvatureError(f"lambda_min = {eig.lambda_min} is not negative")
    if not (0 < gamma <= 1 and delta > 0):
        raise ValueError(f"need gamma in (0, 1] and delta > 0, got {gamma}, {delta}")
    q = (delta * abs(eig.lambda_min)) * eig.eigvec
    curvature = float(q @ (np.asarray(H) @ q))
    return NCDirection(q, gamma, delta, curvature)


def capped_cg(H, g, eps_cap: float, max_iter: int, rtol: float = 1e-6) -> CGOutcome:
    """Conjugate gradient on ``(H + 2 eps_cap I) s = -g`` with curvature capping.

    Any search direction ``p`` with ``p^T (H + 2 eps_cap I) p <= eps_cap |p|^2``
    is returned as a negative curvature direction.  Otherwise the CG iterate is
    returned once the residual falls below ``rtol * |g|`` or after ``max_iter``
    steps.  With ``g = 0`` the Krylov space is empty, so the minimum eigenpair
    of ``H`` is inspected directly instead.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    if n == 0 or H.shape != (n, n):
        raise NumericInputError(f"incompatible shapes H{H.shape}, g{g.shape}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        eig = min_eigenpair(H)
        if eig.lambda_min <= -eps_cap:
            return CGOutcome(CGKind.NEGATIVE_CURVATURE, eig.eigvec, 0)
        return CGOutcome(CGKind.NEWTON_LIKE, np.zeros(n), 0)

    Hs = H + 2.0 * eps_cap * np.eye(n)
    s = np.zeros(n)
    r = -g.copy()
    p = r.copy()
    rr = float(r @ r)
    for it in range(1, max_iter + 1):
        Hp = Hs @ p
        pHp = float(p @ Hp)
        if pHp <= eps_cap * float(p @ p):
            return CGOutcome(CGKind.NEGATIVE_CURVATURE, p, it)
        step = rr / pHp
        s = s + step * p
        r = r - step * Hp
        rr_new = float(r @ r)
        if np.sqrt(rr_new) <= rtol * gnorm:
            return CGOutcome(CGKind.NEWTON_LIKE, s, it)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return CGOutcome(CGKind.NEWTON_LIKE, s, max_iter)
