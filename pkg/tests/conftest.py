"""Shared fixtures and independent oracles.

The batch oracle builds the joint Gaussian of ``(x_0..x_K, y_1..y_K)``
explicitly and conditions it with dense linear algebra; it shares no code
with the recursive filter and smoother.

Every ``fit`` call made in-process is recorded so that the descent check
can inspect all loss traces produced by the suite.
"""

from __future__ import annotations

import functools

import numpy as np
import pytest

import dglasso
import dglasso.solver as _solver

FIT_TRACES: list = []
DESCENT_SLACK = 1e-9


def _recording(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        res = fn(*args, **kwargs)
        FIT_TRACES.append(np.asarray(res.loss_trace, dtype=float))
        return res

    return wrapper


# Patch before any test module (or experiments/cli) binds the name.
_solver.fit = _recording(_solver.fit)
dglasso.fit = _solver.fit


def descent_violations(traces=None) -> list:
    out = []
    for t in FIT_TRACES if traces is None else traces:
        rise = _solver.max_relative_rise(t)
        if rise > DESCENT_SLACK:
            out.append(rise)
    return out


def pytest_sessionfinish(session, exitstatus):
    bad = descent_violations()
    if bad:
        print(f"\nDESCENT VIOLATION in {len(bad)} of {len(FIT_TRACES)} fits; worst {max(bad):.3e}")
        session.exitstatus = 1


# ---------------------------------------------------------------- oracles


def random_spd(rng, n, lo=0.5, hi=2.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Q * rng.uniform(lo, hi, n)) @ Q.T


def random_model(rng, nx, ny, K):
    A = rng.standard_normal((nx, nx))
    A *= 0.9 / max(np.linalg.norm(A, 2), 1e-12)
    P = random_spd(rng, nx)
    obs = dglasso.ObservationModel(rng.standard_normal((ny, nx)), random_spd(rng, ny, 0.2, 1.0),
                                   rng.standard_normal(nx), random_spd(rng, nx, 0.3, 1.0))
    Y = rng.standard_normal((K, ny))
    return dglasso.ModelParams(A, P, obs), dglasso.TimeSeries(Y)


class BatchOracle:
    """Dense conditioning of the joint Gaussian over states and observations."""

    def __init__(self, params, series):
        A, Q = params.A, np.linalg.inv(params.P)
        obs = params.obs
        H, R = obs.H, obs.R
        K = series.K
        nx, ny = A.shape[0], H.shape[0]
        self.nx, self.ny, self.K = nx, ny, K
        n = (K + 1) * nx
        m = np.zeros(n)
        C = np.zeros((n, n))
        m[:nx] = obs.mu0
        C[:nx, :nx] = obs.Sigma0
        for k in range(1, K + 1):
            s, p = slice(k * nx, (k + 1) * nx), slice((k - 1) * nx, k * nx)
            m[s] = A @ m[p]
            # Cov(x_k, x_j) = A Cov(x_{k-1}, x_j) for j < k
            C[s, :k * nx] = A @ C[p, :k * nx]
            C[:k * nx, s] = C[s, :k * nx].T
            C[s, s] = A @ C[p, p] @ A.T + Q
        G = np.zeros((K * ny, n))
        for k in range(1, K + 1):
            G[(k - 1) * ny:k * ny, k * nx:(k + 1) * nx] = H
        self.m, self.C, self.G = m, C, G
        self.Rb = np.kron(np.eye(K), R)
        self.y = series.observations.reshape(-1)

    def condition(self, t):
        """Mean and covariance of all states given ``y_1..y_t``."""
        if t == 0:
            return self.m.copy(), self.C.copy()
        rows = slice(0, t * self.ny)
        G = self.G[rows]
        S = G @ self.C @ G.T + self.Rb[rows, rows]
        Kg = np.linalg.solve(S, G @ self.C).T
        mean = self.m + Kg @ (self.y[rows] - G @ self.m)
        cov = self.C - Kg @ S @ Kg.T
        return mean, 0.5 * (cov + cov.T)

    def block(self, mean, cov, k, j=None):
        j = k if j is None else j
        a, b = slice(k * self.nx, (k + 1) * self.nx), slice(j * self.nx, (j + 1) * self.nx)
        return mean[a], cov[a, b]

    def filtered(self, k):
        mean, cov = self.condition(k)
        return self.block(mean, cov, k)

    def predicted(self, k):
        mean, cov = self.condition(k - 1)
        return self.block(mean, cov, k)

    def smoothed(self, k):
        mean, cov = self.condition(self.K)
        return self.block(mean, cov, k)

    def neg_loglik(self):
        S = self.G @ self.C @ self.G.T + self.Rb
        r = self.y - self.G @ self.m
        _, logdet = np.linalg.slogdet(2 * np.pi * S)
        return 0.5 * logdet + 0.5 * float(r @ np.linalg.solve(S, r))

    def stats(self):
        """Exact smoothing moments with true lag-one cross covariances."""
        mean, cov = self.condition(self.K)
        nx, K = self.nx, self.K
        Psi = np.zeros((nx, nx))
        Delta = np.zeros((nx, nx))
        Phi = np.zeros((nx, nx))
        for k in range(1, K + 1):
            mk, Ckk = self.block(mean, cov, k)
            mp, Cpp = self.block(mean, cov, k - 1)
            _, Ckp = self.block(mean, cov, k, k - 1)
            Psi += Ckk + np.outer(mk, mk)
            Delta += Ckp + np.outer(mk, mp)
            Phi += Cpp + np.outer(mp, mp)
        return Psi / K, Delta / K, Phi / K


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_collection_modifyitems(session, config, items):
    # acceptance last, so the descent criterion sees every fit of the suite
    items.sort(key=lambda it: it.nodeid.startswith("tests/test_acceptance.py"))
