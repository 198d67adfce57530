"""Smooth test objectives with analytic derivatives.

Each problem carries Lipschitz constants for the gradient and the Hessian.
For Rosenbrock these are only valid on the box [-2, 2]^n (the function is
not globally Lipschitz smooth); they are conservative bounds used by the
theory diagnostics, never by the solvers' control flow.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidDimensionError

TEST_BOX = (-2.0, 2.0)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    eval_f: Callable[[np.ndarray], float]
    eval_grad: Callable[[np.ndarray], np.ndarray]
    eval_hess: Callable[[np.ndarray], np.ndarray]
    lipschitz_g: float
    lipschitz_h: float
    lower_bound: float
    default_start: np.ndarray = field(repr=False)


# Chained Rosenbrock.  rosenbrock_2d reuses these evaluators so that n = 2
# gives bit-identical values.

def _rosen_f(x):
    head, tail = x[:-1], x[1:]
    return float(np.sum((1.0 - head) ** 2 + 100.0 * (tail - head ** 2) ** 2))


def _rosen_grad(x):
    head, tail = x[:-1], x[1:]
    t = tail - head ** 2
    g = np.zeros_like(x, dtype=float)
    g[:-1] += -2.0 * (1.0 - head) - 400.0 * head * t
    g[1:] += 200.0 * t
    return g


def _rosen_hess(x):
    n = x.shape[0]
    head, tail = x[:-1], x[1:]
    diag = np.zeros(n)
    diag[:-1] += 1200.0 * head ** 2 - 400.0 * tail + 2.0
    diag[1:] += 200.0
    off = -400.0 * head
    H = np.diag(diag)
    idx = np.arange(n - 1)
    H[idx, idx + 1] = off
    H[idx + 1, idx] = off
    return H


# Bounds over [-2, 2]^2, from maximizing the spectral norms of the Hessian
# and of the third-derivative map v -> D^3 f[v] on an 801 x 801 grid
# (maxima 5717.98 and 4849.41, attained at x1 = +-2), rounded up.
_ROSEN2_LG = 5718.0
_ROSEN2_LH = 4850.0

# n-dimensional bounds on [-2, 2]^n.
# L_g: Gershgorin row bound 1200*4 + 400*2 + 2 + 200 + 2*800 = 7402.
# L_H: Frobenius bound sqrt(2*(4800^2 + 400^2) + 2*400^2) on D^3 f[v], |v| = 1.
_ROSENN_LG = 7402.0
_ROSENN_LH = float(np.ceil(np.sqrt(2 * (4800.0 ** 2 + 400.0 ** 2) + 2 * 400.0 ** 2)))


def rosenbrock_2d() -> ProblemSpec:
    """Classical Rosenbrock function started from (-1.2, 1)."""
    return ProblemSpec(
        name="rosenbrock2",
        dim=2,
        eval_f=_rosen_f,
        eval_grad=_rosen_grad,
        eval_hess=_rosen_hess,
        lipschitz_g=_ROSEN2_LG,
        lipschitz_h=_ROSEN2_LH,
        lower_bound=0.0,
        default_start=np.array([-1.2, 1.0]),
    )


def rosenbrock_nd(n: int) -> ProblemSpec:
    if int(n) != n or n < 2:
        raise InvalidDimensionError(f"chained Rosenbrock needs n >= 2, got {n}")
    n = int(n)
    x0 = np.ones(n)
    x0[0::2] = -1.2
    return ProblemSpec(
        name="rosenbrockN",
        dim=n,
        eval_f=_rosen_f,
        eval_grad=_rosen_grad,
        eval_hess=_rosen_hess,
        lipschitz_g=_ROSENN_LG,
        lipschitz_h=_ROSENN_LH,
        lower_bound=0.0,
        default_start=x0,
    )


def _quartic_f(x):
    return float(x[0] ** 4 / 4.0 - x[0] ** 2 / 2.0 + x[1] ** 2 / 2.0)


def _quartic_grad(x):
    return np.array([x[0] ** 3 - x[0], x[1]], dtype=float)


def _quartic_hess(x):
    return np.array([[3.0 * x[0] ** 2 - 1.0, 0.0], [0.0, 1.0]])


def saddle_quartic() -> ProblemSpec:
    """x1^4/4 - x1^2/2 + x2^2/2: strict saddle at the origin, minima at (+-1, 0)."""
    return ProblemSpec(
        name="saddle_quartic",
        dim=2,
        eval_f=_quartic_f,
        eval_grad=_quartic_grad,
        eval_hess=_quartic_hess,
        # on [-2, 2]^2: max |3 x1^2 - 1| = 11, max |6 x1| = 12
        lipschitz_g=11.0,
        lipschitz_h=12.0,
        lower_bound=-0.25,
        default_start=np.zeros(2),
    )


PROBLEMS = ("rosenbrock2", "rosenbrockN", "saddle_quartic")


def get_problem(name: str, dim: int | None = None) -> ProblemSpec:
    if name == "rosenbrock2":
        return rosenbrock_2d()
    if name == "rosenbrockN":
        return rosenbrock_nd(dim if dim is not None else 2)
    if name == "saddle_quartic":
        return saddle_quartic()
    raise KeyError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}")
