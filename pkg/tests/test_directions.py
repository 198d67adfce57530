import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reference import lambda_min_bisection, negative_inertia
from ss2nc.directions import CGKind, capped_cg, min_eigenpair, nc_direction
from ss2nc.errors import NoNegativeCurvatureError, NumericInputError


def random_sym(rng, n, scale=1.0):
    A = rng.standard_normal((n, n)) * scale
    return (A + A.T) / 2


# -- the reference itself ---------------------------------------------------

def test_reference_inertia_on_diagonal():
    D = np.diag([-3.0, -1.0, 2.0, 5.0])
    assert negative_inertia(D, 0.0) == 2
    assert negative_inertia(D, -2.0) == 1
    assert negative_inertia(D, 10.0) == 4
    assert lambda_min_bisection(D) == pytest.approx(-3.0, abs=1e-12)


def test_reference_bisection_on_known_spectrum():
    # Q diag(w) Q^T with a Householder Q built by hand
    v = np.array([1.0, 2.0, -1.0, 0.5, 3.0])
    v /= np.linalg.norm(v)
    Q = np.eye(5) - 2 * np.outer(v, v)
    w = np.array([-2.5, -0.1, 0.7, 1.0, 4.0])
    A = Q @ np.diag(w) @ Q.T
    assert lambda_min_bisection(A) == pytest.approx(-2.5, abs=1e-11)


# -- min_eigenpair ------------------------------------------------------------

def test_min_eigenpair_examples():
    e = min_eigenpair(np.diag([2.0, -1.0]))
    assert e.lambda_min == -1.0
    assert np.array_equal(e.eigvec, [0.0, 1.0])
    assert min_eigenpair(np.array([[2.0, 0.0], [0.0, 200.0]])).lambda_min == pytest.approx(2.0)


def test_min_eigenpair_matches_bisection_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        A = random_sym(rng, 5)
        assert abs(min_eigenpair(A).lambda_min - lambda_min_bisection(A)) <= 1e-9


def test_min_eigenpair_invariants_and_rayleigh_bound():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = rng.integers(1, 8)
        A = random_sym(rng, n, scale=rng.uniform(0.1, 100))
        e = min_eigenpair(A)
        assert abs(np.linalg.norm(e.eigvec) - 1) <= 1e-12
        assert e.residual <= 1e-10 * max(1.0, np.linalg.norm(A))
        first = e.eigvec[np.abs(e.eigvec) > 1e-12][0]
        assert first > 0
        V = rng.standard_normal((1000, n))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        rq = np.einsum("ij,jk,ik->i", V, A, V)
        assert np.all(rq >= e.lambda_min - 1e-12 * max(1.0, np.abs(A).max()))


def test_min_eigenpair_deterministic():
    A = random_sym(np.random.default_rng(1), 6)
    a, b = min_eigenpair(A), min_eigenpair(A.copy())
    assert a.lambda_min == b.lambda_min and np.array_equal(a.eigvec, b.eigvec)


@pytest.mark.parametrize("bad", [np.array([[np.nan, 0], [0, 1.0]]), np.ones((2, 3)),
                                 np.zeros((0, 0)), np.array([[np.inf]])])
def test_min_eigenpair_rejects_bad_input(bad):
    with pytest.raises(NumericInputError):
        min_eigenpair(bad)


# -- nc_direction ---------------------------------------------------------------

def test_nc_direction_examples():
    H = np.diag([2.0, -1.0])
    d = nc_direction(H, min_eigenpair(H), gamma=1.0, delta=2.0)
    assert np.allclose(np.abs(d.q), [0.0, 2.0])
    assert d.curvature == pytest.approx(-4.0)
    d = nc_direction(H, min_eigenpair(H), gamma=0.5, delta=1.0)
    assert d.curvature == pytest.approx(-1.0)
    assert d.curvature <= 0.5 * -1.0 * np.dot(d.q, d.q)


def test_nc_direction_rejects_nonnegative_curvature():
    H = np.diag([1.0, 0.0])
    with pytest.raises(NoNegativeCurvatureError):
        nc_direction(H, min_eigenpair(H), 0.9, 1.0)
    G = np.diag([1.0, -1.0])
    with pytest.raises(ValueError):
        nc_direction(G, min_eigenpair(G), 1.5, 1.0)
    with pytest.raises(ValueError):
        nc_direction(G, min_eigenpair(G), 0.9, 0.0)


def definition_one_holds(H, d, tol=1e-10):
    lam = np.linalg.eigvalsh(H)[0]
    qq = float(d.q @ d.q)
    curv = float(d.q @ H @ d.q)
    scale = abs(lam) * qq
    cond1 = curv <= d.gamma * lam * qq + tol * scale and d.gamma * lam * qq < 0
    cond2 = abs(np.sqrt(qq) - d.delta * abs(lam)) <= tol * d.delta * abs(lam)
    return cond1 and cond2


@pytest.mark.parametrize("gamma", [0.5, 0.9, 1.0])
@pytest.mark.parametrize("delta", [0.5, 1.0, 2.0])
def test_nc_direction_definition_sweep(gamma, delta):
    rng = np.random.default_rng(int(gamma * 100 + delta * 10))
    done = 0
    while done < 100:
        H = random_sym(rng, rng.integers(2, 7))
        e = min_eigenpair(H)
        if e.lambda_min >= 0:
            continue
        assert definition_one_holds(H, nc_direction(H, e, gamma, delta))
        done += 1


# -- capped_cg ----------------------------------------------------------------------

def test_capped_cg_identity_newton_like():
    out = capped_cg(np.eye(2), np.array([1.0, 0.0]), 0.1, 10)
    assert out.kind is CGKind.NEWTON_LIKE
    assert np.allclose(out.direction, [-1 / 1.2, 0.0])


def test_capped_cg_indefinite_cases():
    H = np.diag([1.0, -1.0])
    out = capped_cg(H, np.array([1.0, 0.0]), 0.1, 10)
    assert out.kind is CGKind.NEWTON_LIKE  # Krylov space never sees e2
    out = capped_cg(H, np.array([1.0, 0.3]), 0.1, 10)
    assert out.kind is CGKind.NEGATIVE_CURVATURE and out.iterations <= 2
    out = capped_cg(-np.eye(2), np.array([1.0, 1.0]), 0.1, 10)
    assert out.kind is CGKind.NEGATIVE_CURVATURE and out.iterations == 1


def test_capped_cg_zero_gradient_uses_eigenpair():
    out = capped_cg(np.diag([-1.0, 1.0]), np.zeros(2), 1e-3, 10)
    assert out.kind is CGKind.NEGATIVE_CURVATURE
    assert np.allclose(np.abs(out.direction), [1.0, 0.0])
    out = capped_cg(np.eye(2), np.zeros(2), 1e-3, 10)
    assert out.kind is CGKind.NEWTON_LIKE and not np.any(out.direction)


def test_capped_cg_solves_spd_systems():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = rng.integers(2, 8)
        B = rng.standard_normal((n, n))
        H = B @ B.T + np.eye(n)
        g = rng.standard_normal(n)
        out = capped_cg(H, g, 1e-3, 5 * n)
        assert out.kind is CGKind.NEWTON_LIKE
        s = np.linalg.solve(H + 2e-3 * np.eye(n), -g)
        assert np.allclose(out.direction, s, rtol=1e-5, atol=1e-8)


def test_capped_cg_negative_curvature_is_negative_unshifted():
    rng = np.random.default_rng(4)
    seen = 0
    for _ in range(200):
        n = rng.integers(2, 7)
        H = random_sym(rng, n)
        eps = 1e-3
        out = capped_cg(H, rng.standard_normal(n), eps, 4 * n)
        if out.kind is CGKind.NEGATIVE_CURVATURE:
            p = out.direction
            shifted = p @ (H + 2 * eps * np.eye(n)) @ p
            assert shifted <= eps * (p @ p)
            if abs(shifted / (p @ p) - 2 * eps) > eps:
                assert p @ H @ p < 0
            seen += 1
    assert seen > 50


def test_capped_cg_input_errors():
    with pytest.raises(NumericInputError):
        capped_cg(np.zeros((0, 0)), np.zeros(0), 0.1, 5)
    with pytest.raises(NumericInputError):
        capped_cg(np.eye(3), np.ones(2), 0.1, 5)
    with pytest.raises(ValueError):
        capped_cg(np.eye(2), np.ones(2), 0.1, 0)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-10, 10)))
def test_property_eigenpair_against_bisection(M):
    A = (M + M.T) / 2
    e = min_eigenpair(A)
    assert abs(e.lambda_min - lambda_min_bisection(A)) <= 1e-9 * max(1.0, np.abs(A).max())
    assert e.lambda_min <= np.diag(A).min() + 1e-12


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-10, 10)),
       st.floats(0.05, 1.0), st.floats(0.1, 5.0))
def test_property_definition_one(M, gamma, delta):
    A = (M + M.T) / 2
    e = min_eigenpair(A)
    if e.lambda_min < -1e-8:
        assert definition_one_holds(A, nc_direction(A, e, gamma, delta), tol=1e-9)
