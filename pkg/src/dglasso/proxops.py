"""Closed-form proximity operators used by the inner solvers.

Three operators, each the minimizer of ``gamma * f(W) + 0.5 * ||W - W0||_F^2``:

* ``prox_l1`` for ``f = ||.||_1`` (entrywise soft thresholding);
* ``prox_quad_trace`` for the quadratic trace term of the transition update,
  solved through a Sylvester equation;
* ``prox_logdet_trace`` for ``-log det W + tr(W Pi)`` (eigenvalue map).

``SylvesterPlan`` caches the eigendecompositions needed by
``prox_quad_trace`` so that the inner loop, which calls it with the same
statistics thousands of times, only pays for a few matrix products.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_sylvester

from .errors import SingularSylvester, SymmetryViolation
from .lgssm import spd_inverse


@dataclass(frozen=True)
class QuadStats:
    """Fixed data of the transition-matrix quadratic: ``(P~, Delta~, Phi~)``."""

    Pt: np.ndarray
    Delta: np.ndarray
    Phi: np.ndarray


@dataclass(frozen=True)
class PiMatrix:
    """Symmetric matrix playing the empirical-covariance role in the P update."""

    Pi: np.ndarray

    def __post_init__(self):
        Pi = np.asarray(self.Pi, dtype=float)
        nrm = np.linalg.norm(Pi)
        if np.linalg.norm(Pi - Pi.T) > 1e-12 * max(nrm, 1e-300):
            raise SymmetryViolation("Pi must be symmetric")
        Pi = 0.5 * (Pi + Pi.T)
        n = Pi.shape[0]
        tr = np.trace(Pi)
        if n and np.linalg.eigvalsh(Pi)[0] < -1e-8 * abs(tr) / n:
            warnings.warn("Pi has a markedly negative eigenvalue", RuntimeWarning)
        object.__setattr__(self, "Pi", Pi)

    @classmethod
    def from_stats(cls, stats, A) -> "PiMatrix":
        return cls(stats.residual_cov(A))


def prox_l1(V: np.ndarray, gamma: float) -> np.ndarray:
    """Entrywise soft thresholding ``sign(v) * max(0, |v| - gamma)``."""
    V = np.asarray(V, dtype=float)
    return np.sign(V) * np.maximum(np.abs(V) - gamma, 0.0)


def solve_lyapunov(X: np.ndarray, Y: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Solve ``X A + A Y = Z`` (Bartels-Stewart, via scipy).

    Raises
    ------
    SingularSylvester
        When ``X`` and ``-Y`` share an eigenvalue up to rounding.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    ex = np.linalg.eigvals(X)
    ey = np.linalg.eigvals(Y)
    gap = np.min(np.abs(ex[:, None] + ey[None, :]))
    scale = max(np.linalg.norm(X, 2), np.linalg.norm(Y, 2), 1e-300)
    if gap <= 1e-13 * scale:
        raise SingularSylvester(f"X and -Y share an eigenvalue (gap {gap:.3e})")
    return solve_sylvester(X, Y, Z)


class SylvesterPlan:
    """Pre-factored ``prox_quad_trace`` for fixed ``(P~, Delta~, Phi~, gamma)``.

    With ``X = P~^{-1}`` and ``Y = 2 gamma Phi~`` both symmetric, their Schur
    forms are eigendecompositions, ``X = U diag(a) U^T`` and
    ``Y = V diag(b) V^T``, so ``X Z + Z Y = C`` is solved by
    ``Z = U [(U^T C V) / (a_i + b_j)] V^T``.
    """

    def __init__(self, stats: QuadStats, gamma: float):
        Pinv = spd_inverse(stats.Pt, "P~")
        Phi = 0.5 * (stats.Phi + stats.Phi.T)
        a, U = np.linalg.eigh(Pinv)
        b, V = np.linalg.eigh(2.0 * gamma * Phi)
        denom = a[:, None] + b[None, :]
        if np.min(np.abs(denom)) <= 1e-13 * max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300):
            raise SingularSylvester("quadratic prox operator is singular")
        self.gamma = gamma
        self.Pinv = Pinv
        self.U, self.V = U, V
        self.inv_denom = 1.0 / denom
        self.const = 2.0 * gamma * stats.Delta

    def __call__(self, Wt: np.ndarray) -> np.ndarray:
        C = self.const + self.Pinv @ Wt
        return self.U @ ((self.U.T @ C @ self.V) * self.inv_denom) @ self.V.T


def quad_trace_value(W: np.ndarray, stats: QuadStats) -> float:
    """``tr(-P~ Delta~ W^T - P~ W Delta~^T + P~ W Phi~ W^T)``."""
    Pt, D, Phi = stats.Pt, stats.Delta, stats.Phi
    return float(np.trace(Pt @ (-D @ W.T - W @ D.T + W @ Phi @ W.T)))


def quad_trace_residual(Z: np.ndarray, Wt: np.ndarray, stats: QuadStats, gamma: float) -> np.ndarray:
    """First-order optimality residual of ``prox_quad_trace`` (premultiplied by ``P~^{-1}``)."""
    Pinv = spd_inverse(stats.Pt, "P~")
    return -2.0 * gamma * stats.Delta + 2.0 * gamma * Z @ stats.Phi + Pinv @ (Z - Wt)


def prox_quad_trace(Wt: np.ndarray, stats: QuadStats, gamma: float) -> np.ndarray:
    """Prox of ``gamma * tr(-P~ Delta~ W^T - P~ W Delta~^T + P~ W Phi~ W^T)`` at ``Wt``.

    Stationarity reads ``2 gamma P~ (Z Phi~ - Delta~) + Z - Wt = 0``; after
    multiplying by ``P~^{-1}`` this is the Sylvester equation
    ``P~^{-1} Z + Z (2 gamma Phi~) = 2 gamma Delta~ + P~^{-1} Wt``.
    """
    Wt = np.asarray(Wt, dtype=float)
    Pinv = spd_inverse(stats.Pt, "P~")
    rhs = 2.0 * gamma * stats.Delta + Pinv @ Wt
    return solve_lyapunov(Pinv, 2.0 * gamma * stats.Phi, rhs)


def logdet_eigen_map(omega: np.ndarray, gamma: float) -> np.ndarray:
    """``0.5 * (w + sqrt(w^2 + 4 gamma))`` without cancellation for ``w << 0``."""
    omega = np.asarray(omega, dtype=float)
    root = np.sqrt(omega * omega + 4.0 * gamma)
    out = np.empty_like(omega)
    pos = omega >= 0
    out[pos] = 0.5 * (omega[pos] + root[pos])
    neg = ~pos
    out[neg] = 2.0 * gamma / (root[neg] - omega[neg])
    return out


def prox_logdet_trace(Wt: np.ndarray, Pi, gamma: float) -> np.ndarray:
    """Prox of ``gamma * (-log det W + tr(W Pi))`` over symmetric matrices.

    The result is always symmetric positive definite.

    Raises
    ------
    SymmetryViolation
        If ``Wt`` is asymmetric beyond 1e-8 relative.
    """
    Pi = Pi.Pi if isinstance(Pi, PiMatrix) else np.asarray(Pi, dtype=float)
    Wt = np.asarray(Wt, dtype=float)
    nrm = np.linalg.norm(Wt)
    if np.linalg.norm(Wt - Wt.T) > 1e-8 * max(nrm, 1.0):
        raise SymmetryViolation("prox_logdet_trace needs a symmetric anchor")
    M = Wt - gamma * Pi
    M = 0.5 * (M + M.T)
    omega, U = np.linalg.eigh(M)
    Z = (U * logdet_eigen_map(omega, gamma)) @ U.T
    return 0.5 * (Z + Z.T)


def logdet_trace_residual(Z: np.ndarray, Wt: np.ndarray, Pi, gamma: float) -> np.ndarray:
    Pi = Pi.Pi if isinstance(Pi, PiMatrix) else np.asarray(Pi, dtype=float)
    return -gamma * np.linalg.inv(Z) + gamma * Pi + Z - Wt
