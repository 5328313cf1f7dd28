import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dglasso.errors import SingularSylvester, SymmetryViolation
from dglasso.proxops import (
    PiMatrix,
    QuadStats,
    SylvesterPlan,
    logdet_eigen_map,
    logdet_trace_residual,
    prox_l1,
    prox_logdet_trace,
    prox_quad_trace,
    quad_trace_residual,
    quad_trace_value,
    solve_lyapunov,
)

from conftest import random_spd


def vec(M):
    return M.reshape(-1, order="F")


def unvec(v, n):
    return v.reshape((n, n), order="F")


def quad_oracle(Wt, stats, gamma):
    """Solve 2 gamma P~ (Z Phi~ - Delta~) + Z - Wt = 0 by a Kronecker system."""
    n = Wt.shape[0]
    M = 2 * gamma * np.kron(stats.Phi.T, stats.Pt) + np.eye(n * n)
    return unvec(np.linalg.solve(M, vec(Wt + 2 * gamma * stats.Pt @ stats.Delta)), n)


def random_quad(rng, n=3):
    B = rng.standard_normal((n, n))
    return QuadStats(random_spd(rng, n), rng.standard_normal((n, n)), B @ B.T / n)


# ---------------------------------------------------------------- prox_l1


def test_prox_l1_examples():
    assert prox_l1(np.array([[2.5]]), 1.0)[0, 0] == 1.5
    assert prox_l1(np.array([[-0.5]]), 1.0)[0, 0] == 0.0
    out = prox_l1(np.array([[3, -2], [0.1, -4]], dtype=float), 0.5)
    assert np.array_equal(out, [[2.5, -1.5], [0, -3.5]])


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (3, 3), elements=finite), arrays(float, (3, 3), elements=finite),
       st.floats(0.01, 10))
def test_prox_l1_nonexpansive(V1, V2, gamma):
    d = np.linalg.norm(prox_l1(V1, gamma) - prox_l1(V2, gamma))
    assert d <= np.linalg.norm(V1 - V2) + 1e-12


@settings(max_examples=60, deadline=None)
@given(arrays(float, (2, 3), elements=finite), st.floats(0.01, 10))
def test_prox_l1_reduces_objective(V, gamma):
    Z = prox_l1(V, gamma)
    lhs = gamma * np.abs(Z).sum() + 0.5 * np.sum((Z - V) ** 2)
    assert lhs <= gamma * np.abs(V).sum() + 1e-9


# ---------------------------------------------------------------- Sylvester


def test_lyapunov_scalar_and_identity(rng):
    assert solve_lyapunov(np.array([[2.0]]), np.array([[3.0]]), np.array([[10.0]]))[0, 0] == \
        pytest.approx(2.0)
    Z = rng.standard_normal((3, 3))
    assert np.allclose(solve_lyapunov(np.eye(3), np.zeros((3, 3)), Z), Z)


@pytest.mark.parametrize("seed", range(5))
def test_lyapunov_kronecker(seed):
    rng = np.random.default_rng(seed)
    X = random_spd(rng, 4, 1.0, 2.0)
    Y = random_spd(rng, 4, 3.0, 4.0)
    Z = rng.standard_normal((4, 4))
    A = solve_lyapunov(X, Y, Z)
    assert np.linalg.norm(X @ A + A @ Y - Z) < 1e-10 * np.linalg.norm(Z)
    kron = np.kron(np.eye(4), X) + np.kron(Y.T, np.eye(4))
    assert np.allclose(vec(A), np.linalg.solve(kron, vec(Z)), atol=1e-10)


def test_lyapunov_singular():
    with pytest.raises(SingularSylvester):
        solve_lyapunov(np.array([[1.0]]), np.array([[-1.0]]), np.array([[1.0]]))


# ---------------------------------------------------------------- quadratic prox


def test_prox_quad_scalar():
    stats = QuadStats(np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]))
    assert prox_quad_trace(np.zeros((1, 1)), stats, 1.0)[0, 0] == pytest.approx(2 / 3, abs=1e-10)


def test_prox_quad_no_quadratic(rng):
    W = rng.standard_normal((3, 3))
    stats = QuadStats(random_spd(rng, 3), np.zeros((3, 3)), np.zeros((3, 3)))
    assert np.allclose(prox_quad_trace(W, stats, 0.7), W, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_prox_quad_kronecker(seed):
    rng = np.random.default_rng(seed)
    stats = random_quad(rng)
    W = rng.standard_normal((3, 3))
    gamma = rng.uniform(0.1, 5)
    Z = prox_quad_trace(W, stats, gamma)
    assert np.allclose(Z, quad_oracle(W, stats, gamma), atol=1e-8)
    assert np.allclose(SylvesterPlan(stats, gamma)(W), Z, atol=1e-10)


def test_prox_quad_uses_phi_not_psi(rng):
    """The oracle built on Phi~ pins which second moment enters the quadratic."""
    stats = random_quad(rng)
    W = rng.standard_normal((3, 3))
    other = QuadStats(stats.Pt, stats.Delta, stats.Phi + np.eye(3))
    assert not np.allclose(prox_quad_trace(W, other, 1.0), quad_oracle(W, stats, 1.0), atol=1e-6)


def test_prox_quad_residual_and_descent(rng):
    for _ in range(100):
        stats = random_quad(rng)
        W = rng.standard_normal((3, 3))
        gamma = rng.uniform(0.1, 5)
        Z = prox_quad_trace(W, stats, gamma)
        assert np.linalg.norm(quad_trace_residual(Z, W, stats, gamma)) <= \
            1e-9 * max(1.0, np.linalg.norm(W))
        f = lambda M: gamma * quad_trace_value(M, stats)
        assert f(Z) + 0.5 * np.sum((Z - W) ** 2) <= f(W) + 1e-9


# ---------------------------------------------------------------- log-det prox


def test_prox_logdet_scalars():
    assert prox_logdet_trace(np.zeros((1, 1)), np.zeros((1, 1)), 1.0)[0, 0] == \
        pytest.approx(1.0, abs=1e-10)
    z = prox_logdet_trace(np.array([[3.0]]), np.array([[1.0]]), 1.0)[0, 0]
    assert z == pytest.approx(1 + np.sqrt(2), abs=1e-10)
    assert -1 / z + 1 + z - 3 == pytest.approx(0.0, abs=1e-12)


def test_prox_logdet_random(rng):
    for _ in range(100):
        B = rng.standard_normal((4, 4))
        W = B + B.T
        C = rng.standard_normal((4, 4))
        Pi = C @ C.T
        gamma = rng.uniform(0.1, 5)
        Z = prox_logdet_trace(W, PiMatrix(Pi), gamma)
        assert np.all(np.linalg.eigvalsh(Z) > 0)
        R = logdet_trace_residual(Z, W, Pi, gamma)
        assert np.linalg.norm(R) <= 1e-9 * max(1.0, np.linalg.norm(W))

        def obj(M):
            _, ld = np.linalg.slogdet(M)
            return gamma * (np.sum(M * Pi) - ld) + 0.5 * np.sum((M - W) ** 2)

        assert obj(Z) < obj(np.eye(4))
        if np.all(np.linalg.eigvalsh(W) > 0):
            assert obj(Z) < obj(W)


def test_prox_logdet_eigen_map(rng):
    B = rng.standard_normal((3, 3))
    W = B + B.T
    Pi = np.eye(3) * 0.3
    gamma = 0.8
    Z = prox_logdet_trace(W, Pi, gamma)
    omega = np.linalg.eigvalsh(W - gamma * Pi)
    assert np.allclose(np.linalg.eigvalsh(Z), np.sort(logdet_eigen_map(omega, gamma)), atol=1e-12)


def test_prox_logdet_rejects_asymmetric():
    with pytest.raises(SymmetryViolation):
        prox_logdet_trace(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2), 1.0)
    with pytest.raises(SymmetryViolation):
        PiMatrix(np.array([[1.0, 1.0], [0.0, 1.0]]))


@settings(max_examples=50, deadline=None)
@given(arrays(float, 5, elements=st.floats(-1e3, 1e3)), st.floats(1e-3, 1e3))
def test_eigen_map_positive_and_stationary(omega, gamma):
    z = logdet_eigen_map(omega, gamma)
    assert np.all(z > 0)
    assert np.allclose(z * z - omega * z - gamma, 0.0, atol=1e-7 * (1 + np.abs(omega) ** 2 + gamma))
