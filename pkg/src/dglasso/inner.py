"""Inner solvers for the two strongly convex block updates.

Transition update (``C1``)::

    theta K/2 tr(P~ (Psi - Delta A^T - A Delta^T + A Phi A^T))
        + theta lambda ||A||_1 + 1/2 ||A - A~||_F^2

Precision update (``C2``)::

    theta K/2 tr(P Pi) - theta K/2 log det P + theta lambda ||P||_1
        + 1/2 ||P - P~||_F^2

Both are solved by the same two-prox splitting loop: an l1 prox on the
primal side and a smooth-term prox (Sylvester solve or eigenvalue map)
applied to the dual variable. The loops live in ``_inner_ext`` (compiled)
or ``_inner_py`` (numpy), selected by ``dglasso._backend``. ``reference_prox_gradient``
is an independent accelerated forward-backward solver used to check the
splitting and as a fallback when it stalls.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._inner_py import CONVERGED, STALLED
from .errors import MaxIterExceeded, NoProgress, NonSPD
from .lgssm import SmoothingStats, is_spd
from .proxops import (
    PiMatrix,
    QuadStats,
    SylvesterPlan,
    prox_l1,
)

log = logging.getLogger(__name__)

_NO_PROGRESS_RUN = 10
EIGEN_FAILURE = 3


@dataclass(frozen=True)
class InnerConfig:
    """Settings of the splitting loop.

    vartheta : float
        Step in (0, 2).
    xi : float
        Stop when the objective changes by at most ``xi`` between iterates.
    max_iter : int
    """

    vartheta: float = 1.0
    xi: float = 1e-3
    max_iter: int = 20000

    def __post_init__(self):
        if not 0.0 < self.vartheta < 2.0:
            raise ValueError("vartheta must lie in (0, 2)")
        if not self.xi > 0.0:
            raise ValueError("xi must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class InnerResult:
    solution: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    residual: float = float("nan")
    used_fallback: bool = False


def _soft_residual(G: np.ndarray, X: np.ndarray, weight: float) -> float:
    """Norm of the minimal-norm element of ``G + weight * d||X||_1``."""
    nz = X != 0
    R = np.where(nz, G + weight * np.sign(X), np.maximum(np.abs(G) - weight, 0.0))
    return float(np.linalg.norm(R))


@dataclass(frozen=True)
class TransitionProblem:
    """Data of the transition-matrix subproblem ``C1``."""

    At: np.ndarray
    Pt: np.ndarray
    stats: SmoothingStats
    lam: float
    theta: float
    K: int

    @property
    def scale(self) -> float:
        return 0.5 * self.theta * self.K

    @property
    def l1_weight(self) -> float:
        return self.theta * self.lam

    def smooth(self, A):
        s = self.stats
        M = s.Psi - s.Delta @ A.T - A @ s.Delta.T + A @ s.Phi @ A.T
        D = A - self.At
        return self.scale * float(np.sum(self.Pt * M.T)) + 0.5 * float(np.sum(D * D))

    def grad(self, A):
        s = self.stats
        return 2.0 * self.scale * self.Pt @ (A @ s.Phi - s.Delta) + (A - self.At)

    def value(self, A):
        return self.smooth(A) + self.l1_weight * float(np.abs(A).sum())

    def residual(self, A):
        return _soft_residual(self.grad(A), A, self.l1_weight)

    def in_domain(self, A):
        return True

    def lipschitz(self):
        return 2.0 * self.scale * np.linalg.norm(self.Pt, 2) * np.linalg.norm(self.stats.Phi, 2) + 1.0


@dataclass(frozen=True)
class PrecisionProblem:
    """Data of the precision-matrix subproblem ``C2``."""

    Pt: np.ndarray
    Pi: np.ndarray
    lam: float
    theta: float
    K: int

    @property
    def scale(self) -> float:
        return 0.5 * self.theta * self.K

    @property
    def l1_weight(self) -> float:
        return self.theta * self.lam

    def smooth(self, P):
        try:
            L = np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            return math.inf
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        D = P - self.Pt
        return self.scale * (float(np.sum(P * self.Pi)) - logdet) + 0.5 * float(np.sum(D * D))

    def grad(self, P):
        Pinv = np.linalg.inv(P)
        G = self.scale * (self.Pi - 0.5 * (Pinv + Pinv.T)) + (P - self.Pt)
        return 0.5 * (G + G.T)

    def value(self, P):
        f = self.smooth(P)
        return f + self.l1_weight * float(np.abs(P).sum()) if math.isfinite(f) else math.inf

    def residual(self, P):
        if not is_spd(P):
            return math.inf
        return _soft_residual(self.grad(P), P, self.l1_weight)

    def in_domain(self, P):
        return is_spd(P)

    def lipschitz(self):
        # local estimate only; backtracking corrects it
        return 2.0 * self.scale / max(np.linalg.eigvalsh(self.Pt)[0], 1e-12) ** 2 + 1.0


def objective_A(A, At, Pt, stats, lambda_A, theta_A, K=None) -> float:
    """Value of ``C1`` at ``A``."""
    return TransitionProblem(At, Pt, stats, lambda_A, theta_A, K or stats.K).value(A)


def objective_P(P, Pt, Pi, lambda_P, theta_P, K) -> float:
    """Value of ``C2`` at ``P`` (``+inf`` outside the SPD cone)."""
    Pi = Pi.Pi if isinstance(Pi, PiMatrix) else Pi
    return PrecisionProblem(Pt, Pi, lambda_P, theta_P, K).value(P)


def _pick_K(K, stats):
    return int(K if K is not None else stats.K)


def _finite(trace):
    trace = np.asarray(trace, dtype=float)
    return trace[np.isfinite(trace)]


def solve_A_update(At, Pt, stats: SmoothingStats, lambda_A: float, theta_A: float,
                   K: int | None = None, cfg: InnerConfig = InnerConfig(),
                   fallback: bool = True, backend: str | None = None) -> InnerResult:
    """Minimize ``C1`` starting from the tangent point ``At``.

    Iterates ``A_n = prox_l1(A~ - V_n)``, ``W_n = V_n + vartheta A_n``,
    ``Z_n = prox_quad(W_n / vartheta)``, ``V_{n+1} = W_n - vartheta Z_n``
    from ``V_0 = A~``. Stops once the objective changes by at most ``xi``
    and the minimal subgradient norm at ``A_n`` is at most ``10 xi``.

    Raises
    ------
    NoProgress
        If the objective keeps rising and ``fallback`` is False.
    """
    At = np.ascontiguousarray(At, dtype=float)
    Pt = np.ascontiguousarray(Pt, dtype=float)
    prob = TransitionProblem(At, Pt, stats, lambda_A, theta_A, _pick_K(K, stats))
    plan = SylvesterPlan(QuadStats(Pt, stats.Delta, stats.Phi), prob.scale / cfg.vartheta)
    split, _ = _backend.get_inner_kernels(backend)
    c = np.ascontiguousarray
    X, _, trace, n, status = split(
        At, Pt, c(plan.Pinv), c(plan.U), c(plan.V), c(plan.inv_denom), c(plan.const),
        c(stats.Delta), c(stats.Phi), float(np.sum(Pt * stats.Psi)), prob.scale,
        prob.l1_weight, cfg.vartheta, cfg.xi, cfg.max_iter, _NO_PROGRESS_RUN)
    if status == STALLED:
        if not fallback:
            raise NoProgress("transition update objective kept increasing")
        log.info("transition splitting stalled after %d iterations; using reference solver", n)
        X = reference_prox_gradient(prob, X, tol=cfg.xi)
        trace = np.append(trace, prob.value(X))
        return InnerResult(X, trace, n, True, prob.residual(X), True)
    return InnerResult(X, trace, n, status == CONVERGED, prob.residual(X))


def solve_P_update(At, Pt, stats: SmoothingStats, lambda_P: float, theta_P: float,
                   K: int | None = None, cfg: InnerConfig = InnerConfig(),
                   fallback: bool = True, backend: str | None = None) -> InnerResult:
    """Minimize ``C2`` starting from the tangent point ``Pt``.

    ``Pi`` is built from the statistics at ``At``. Same scheme and stopping
    rule as :func:`solve_A_update`, with the log-det prox in place of the
    Sylvester solve. The returned matrix is symmetric positive definite.
    Iterates outside the SPD cone have objective ``+inf`` and are left out
    of ``objective_trace``.
    """
    Pt = np.ascontiguousarray(Pt, dtype=float)
    Pi = np.ascontiguousarray(PiMatrix.from_stats(stats, np.asarray(At, dtype=float)).Pi)
    prob = PrecisionProblem(Pt, Pi, lambda_P, theta_P, _pick_K(K, stats))
    _, split = _backend.get_inner_kernels(backend)
    X, Z, trace, n, status = split(
        Pt, Pi, prob.scale / cfg.vartheta, prob.scale, prob.l1_weight,
        cfg.vartheta, cfg.xi, cfg.max_iter, _NO_PROGRESS_RUN)
    if status == EIGEN_FAILURE:
        raise NonSPD("eigensolver failed in the precision update")
    if not is_spd(X):
        # the l1 branch iterate can leave the cone before convergence; the
        # log-det branch iterate never does
        X = Z
    X = 0.5 * (X + X.T)
    trace = _finite(trace)
    if status == STALLED:
        if not fallback:
            raise NoProgress("precision update objective kept increasing")
        log.info("precision splitting stalled after %d iterations; using reference solver", n)
        X = reference_prox_gradient(prob, X, tol=cfg.xi)
        trace = np.append(trace, prob.value(X))
        return InnerResult(X, trace, n, True, prob.residual(X), True)
    return InnerResult(X, trace, n, status == CONVERGED, prob.residual(X))


def _step_ok(problem, fy, g, f_new, x_new, y, L) -> bool:
    """Sufficient-decrease test of the backtracking line search.

    Once the quadratic model term drops below the resolution of ``f`` the
    value test is pure rounding noise; the local Lipschitz estimate
    ``||grad(x_new) - grad(y)|| <= L ||x_new - y||`` is used instead.
    """
    d = x_new - y
    dd = float(np.sum(d * d))
    quad = 0.5 * L * dd
    if quad > 1e-10 * max(abs(fy), 1.0):
        return f_new <= fy + float(np.sum(g * d)) + quad
    return float(np.linalg.norm(problem.grad(x_new) - g)) <= L * math.sqrt(dd)


def reference_prox_gradient(problem, init, tol: float = 1e-10, max_iter: int = 200000):
    """Accelerated proximal gradient with backtracking and adaptive restart.

    Works for ``TransitionProblem`` and ``PrecisionProblem``. Both are
    1-strongly convex, so stopping when the minimal subgradient norm drops
    below ``tol`` bounds the distance to the minimizer by ``tol``.

    Raises
    ------
    MaxIterExceeded
    """
    x = np.array(init, dtype=float)
    if not problem.in_domain(x):
        raise ValueError("initial point outside the problem domain")
    w = problem.l1_weight
    L = max(problem.lipschitz(), 1.0)
    fx = problem.value(x)
    y, t = x.copy(), 1.0
    for _ in range(max_iter):
        if problem.residual(x) <= tol:
            return x
        fy = problem.smooth(y)
        g = problem.grad(y)
        while True:
            x_new = prox_l1(y - g / L, w / L)
            if isinstance(problem, PrecisionProblem):
                x_new = 0.5 * (x_new + x_new.T)
            f_new = problem.smooth(x_new)
            if math.isfinite(f_new) and _step_ok(problem, fy, g, f_new, x_new, y, L):
                break
            L *= 2.0
            if L > 1e30:
                raise MaxIterExceeded("backtracking failed")
        F_new = f_new + w * float(np.abs(x_new).sum())
        if F_new > fx:
            # adaptive restart: drop momentum, retry from the last iterate
            if np.array_equal(y, x):
                x, fx = x_new, F_new
            y, t = x.copy(), 1.0
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        if not problem.in_domain(y):
            y, t_new = x_new.copy(), 1.0
        x, fx, t = x_new, F_new, t_new
        L *= 0.95
    raise MaxIterExceeded(f"reference solver did not reach tol={tol} in {max_iter} iterations")
