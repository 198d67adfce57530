"""Independent reference computations used as test oracles.

None of these call into the package or into LAPACK eigen-routines; they are
slow, simple and meant to be obviously correct.
"""
import math

import numpy as np


def negative_inertia(A, sigma):
    """Number of eigenvalues of symmetric ``A`` below ``sigma``.

    Gaussian elimination without pivoting on ``A - sigma I``; by Sylvester's
    law of inertia the count of negative pivots equals the count of
    eigenvalues below ``sigma``.  A (near-)zero pivot is nudged to a tiny positive
    value, which only matters on a measure-zero set of shifts.
    """
    M = [[float(A[i][j]) for j in range(len(A))] for i in range(len(A))]
    n = len(M)
    tiny = 1e-14 * (1.0 + max(abs(v) for row in M for v in row) + abs(sigma))
    for i in range(n):
        M[i][i] -= sigma
    count = 0
    for k in range(n):
        piv = M[k][k]
        if abs(piv) < tiny:
            piv = tiny
        if piv < 0:
            count += 1
        for i in range(k + 1, n):
            factor = M[i][k] / piv
            if factor != 0.0:
                for j in range(k + 1, n):
                    M[i][j] -= factor * M[k][j]
    return count


def lambda_min_bisection(A, tol=1e-13):
    """Smallest eigenvalue by bisection on the inertia count, bracketed by
    Gershgorin discs."""
    n = len(A)
    lo = min(A[i][i] - sum(abs(A[i][j]) for j in range(n) if j != i) for i in range(n))
    hi = max(A[i][i] + sum(abs(A[i][j]) for j in range(n) if j != i) for i in range(n))
    lo, hi = lo - 1.0, hi + 1.0
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if negative_inertia(A, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def fd_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h * max(1.0, abs(x[i]))
        g[i] = (f(x + e) - f(x - e)) / (2 * e[i])
    return g


def fd_hessian(grad, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    n = len(x)
    H = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h * max(1.0, abs(x[i]))
        H[:, i] = (grad(x + e) - grad(x - e)) / (2 * e[i])
    return 0.5 * (H + H.T)


def binomial_slack(p, n, k=3.0):
    return k * math.sqrt(p * (1 - p) / n)


def armijo_descent(F, Fp, alpha, slope, c_d, e_f):
    """Relaxed Armijo test written out independently of the solver."""
    return Fp <= F + c_d * alpha * slope + e_f


def replay_steps(records, method, alpha0, beta0, tau):
    """Step sizes rebuilt from the attempt/success flags of a trace.

    Two-step methods keep separate alpha and beta; the Newton-CG variant
    shares one step size between both kinds of step.
    """
    shared = method == "SS-NC-CG"
    a, b = alpha0, (alpha0 if shared else beta0)
    out = []
    for r in records:
        row = [a, b]
        if shared:
            if r.omega_g or r.omega_H:
                a = a / tau if (r.theta_g or r.theta_H) else a * tau
            b = a
        else:
            if r.omega_g:
                a = a / tau if r.theta_g else a * tau
            if r.omega_H:
                b = b / tau if r.theta_H else b * tau
        out.append((*row, a, b))
    return out
