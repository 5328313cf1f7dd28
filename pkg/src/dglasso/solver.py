"""Outer block-alternating majorize-minimize loop.

Each outer iteration builds the quadratic surrogate of the negative
log-likelihood at the current pair ``(A, P)`` from smoothing statistics,
then takes a proximal step on ``A`` (lasso-type problem) followed by a
proximal step on ``P`` (graphical-lasso-type problem) around a freshly
rebuilt surrogate. Four modes share the loop:

``DGLASSO``
    Both penalized steps.
``MLEM``
    Closed-form EM steps, no penalty and no proximal term.
``A_ONLY``
    Only the ``A`` step; ``P`` stays at ``init_P``.
``P_ONLY``
    Only the ``P`` step with ``A`` pinned to zero.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DivergenceDetected, NonSPD
from .inner import InnerConfig, objective_A, objective_P, solve_A_update, solve_P_update
from .lgssm import (
    ModelParams,
    ObservationModel,
    SmoothingStats,
    TimeSeries,
    clip_spectral,
    marginal_negloglik,
    smoothing_stats,
    spd_inverse,
)

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)
DIVERGENCE_RTOL = 1e-6


class Mode(str, enum.Enum):
    DGLASSO = "DGLASSO"
    MLEM = "MLEM"
    A_ONLY = "A_ONLY"
    P_ONLY = "P_ONLY"


def default_init_A(nx: int, cap: float = 0.99) -> np.ndarray:
    """Entries ``0.1 ** |n - m|`` projected onto the spectral-norm ball ``cap``."""
    idx = np.arange(nx)
    return clip_spectral(0.1 ** np.abs(idx[:, None] - idx[None, :]), cap)


def default_init_P(nx: int) -> np.ndarray:
    return 0.1 * np.eye(nx)


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters and mode of :func:`fit`.

    ``init_A`` / ``init_P`` default to :func:`default_init_A` and
    :func:`default_init_P`. In ``A_ONLY`` mode ``init_P`` is the fixed
    precision; in ``P_ONLY`` mode ``init_A`` is ignored.
    """

    lambda_A: float = 0.0
    lambda_P: float = 0.0
    theta_A: float = 1.0
    theta_P: float = 1.0
    epsilon: float = 1e-3
    max_outer: int = 50
    inner: InnerConfig = field(default_factory=InnerConfig)
    mode: Mode = Mode.DGLASSO
    init_A: Optional[np.ndarray] = None
    init_P: Optional[np.ndarray] = None
    backend: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.lambda_A < 0 or self.lambda_P < 0:
            raise ValueError("regularization weights must be nonnegative")
        if self.theta_A <= 0 or self.theta_P <= 0 or self.epsilon <= 0:
            raise ValueError("theta_A, theta_P and epsilon must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")

    def starting_point(self, nx: int):
        A = default_init_A(nx) if self.init_A is None else np.array(self.init_A, dtype=float)
        P = default_init_P(nx) if self.init_P is None else np.array(self.init_P, dtype=float)
        if self.mode is Mode.P_ONLY:
            A = np.zeros((nx, nx))
        if A.shape != (nx, nx) or P.shape != (nx, nx):
            raise ValueError(f"initial matrices must be {nx}x{nx}")
        return A, P

    @property
    def penalties(self):
        """Weights entering the reported loss (zero for MLEM)."""
        if self.mode is Mode.MLEM:
            return 0.0, 0.0
        return self.lambda_A, self.lambda_P


@dataclass(frozen=True)
class FitResult:
    A_hat: np.ndarray
    P_hat: np.ndarray
    Q_hat: np.ndarray
    loss_trace: np.ndarray
    outer_iterations: int
    converged: bool
    wall_time_seconds: float
    mode: Mode = Mode.DGLASSO
    inner_iterations: tuple = ()
    inner_converged: tuple = ()

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "loss_trace": [float(v) for v in self.loss_trace],
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "wall_time_seconds": self.wall_time_seconds,
            "inner_iterations": [list(p) for p in self.inner_iterations],
            "inner_converged": [list(p) for p in self.inner_converged],
        }


def _l1(M) -> float:
    return float(np.abs(M).sum())


def evaluate_loss(A, P, series: TimeSeries, obs: ObservationModel,
                  lambda_A: float = 0.0, lambda_P: float = 0.0, backend=None) -> float:
    """Penalized negative log-likelihood ``-log p(y | A, P) + lA ||A||_1 + lP ||P||_1``.

    Raises
    ------
    NonSPD
        If ``P`` is not symmetric positive definite.
    """
    nll = marginal_negloglik(ModelParams(A, P, obs), series, backend)
    return nll + lambda_A * _l1(A) + lambda_P * _l1(P)


def evaluate_majorizer(A, P, stats: SmoothingStats, K: Optional[int] = None) -> float:
    """``K/2 tr(P (Psi - Delta A^T - A Delta^T + A Phi A^T)) - K/2 log det(2 pi P)``.

    Returns ``+inf`` when ``P`` is not positive definite.
    """
    K = stats.K if K is None else K
    P = np.asarray(P, dtype=float)
    try:
        L = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return math.inf
    n = P.shape[0]
    logdet = 2.0 * float(np.sum(np.log(np.diag(L)))) + n * _LOG_2PI
    M = stats.residual_cov(np.asarray(A, dtype=float))
    return 0.5 * K * (float(np.sum(P * M)) - logdet)


def mlem_transition(stats: SmoothingStats) -> np.ndarray:
    """EM transition update ``Delta Phi^{-1}``."""
    return np.linalg.solve(stats.Phi.T, stats.Delta.T).T


def mlem_precision(stats: SmoothingStats, A) -> np.ndarray:
    """EM precision update ``(Psi - Delta A^T - A Delta^T + A Phi A^T)^{-1}``."""
    return spd_inverse(stats.residual_cov(A), "residual covariance")


class _Loop:
    """One fit; kept as a small object so the step helpers share state."""

    def __init__(self, series, obs, cfg):
        self.series, self.obs, self.cfg = series, obs, cfg
        self.K = series.K
        self.passes = 0

    def stats(self, A, P):
        self.passes += 1
        return smoothing_stats(ModelParams(A, P, self.obs), self.series, self.cfg.backend)

    def loss(self, A, P, stats):
        lA, lP = self.cfg.penalties
        return stats.neg_loglik + lA * _l1(A) + lP * _l1(P)

    def step_A(self, A, P, stats):
        cfg = self.cfg
        if cfg.mode is Mode.MLEM:
            return mlem_transition(stats), 0, True
        res = solve_A_update(A, P, stats, cfg.lambda_A, cfg.theta_A, self.K, cfg.inner,
                             backend=cfg.backend)
        A_new = res.solution
        # keep the tangent point if the inexact solve did not improve on it
        if objective_A(A_new, A, P, stats, cfg.lambda_A, cfg.theta_A, self.K) > \
                objective_A(A, A, P, stats, cfg.lambda_A, cfg.theta_A, self.K):
            A_new = A
        return A_new, res.iterations, res.converged

    def step_P(self, A, P, stats):
        cfg = self.cfg
        if cfg.mode is Mode.MLEM:
            return mlem_precision(stats, A), 0, True
        res = solve_P_update(A, P, stats, cfg.lambda_P, cfg.theta_P, self.K, cfg.inner,
                             backend=cfg.backend)
        P_new = res.solution
        Pi = stats.residual_cov(A)
        if objective_P(P_new, P, Pi, cfg.lambda_P, cfg.theta_P, self.K) > \
                objective_P(P, P, Pi, cfg.lambda_P, cfg.theta_P, self.K):
            P_new = P
        return P_new, res.iterations, res.converged


def max_relative_rise(trace) -> float:
    """Largest step increase of ``trace`` divided by ``|trace[0]|`` (<= 0 if monotone)."""
    t = np.asarray(trace, dtype=float)
    if t.size < 2:
        return 0.0
    return float(np.max(np.diff(t))) / max(abs(t[0]), 1e-300)


def _rel_change(new, old) -> float:
    nrm = np.linalg.norm(old)
    diff = np.linalg.norm(new - old)
    return 0.0 if diff == 0.0 else diff / nrm if nrm > 0 else math.inf


def fit(series: TimeSeries, obs: ObservationModel, cfg: SolverConfig = SolverConfig()) -> FitResult:
    """Estimate ``(A, P)`` from ``series`` with the outer loop described above.

    Raises
    ------
    NonSPD
        Propagated from the filter when an iterate is numerically invalid.
    DivergenceDetected
        If the loss rises by more than ``1e-6`` relative between outer
        iterations; the exception carries the partial :class:`FitResult`.
    """
    t0 = time.perf_counter()
    loop = _Loop(series, obs, cfg)
    mode = cfg.mode
    A, P = cfg.starting_point(obs.nx)
    stats = loop.stats(A, P)
    losses = [loop.loss(A, P, stats)]
    inner_its, inner_conv = [], []
    converged = False
    it = 0

    def result(conv):
        return FitResult(A, P, spd_inverse(P, "P_hat"), np.asarray(losses), it, conv,
                         time.perf_counter() - t0, mode, tuple(inner_its), tuple(inner_conv))

    for it in range(1, cfg.max_outer + 1):
        nA = nP = 0
        cA = cP = True
        if mode is Mode.P_ONLY:
            A_new = A
        else:
            A_new, nA, cA = loop.step_A(A, P, stats)
        if mode is Mode.A_ONLY:
            P_new = P
        else:
            # rebuild the surrogate at (A_new, P) unless A did not move
            stats_b = stats if A_new is A else loop.stats(A_new, P)
            P_new, nP, cP = loop.step_P(A_new, P, stats_b)
        inner_its.append((nA, nP))
        inner_conv.append((cA, cP))
        dA, dP = _rel_change(A_new, A), _rel_change(P_new, P)
        A, P = A_new, P_new
        stats = loop.stats(A, P)
        losses.append(loop.loss(A, P, stats))
        prev, cur = losses[-2], losses[-1]
        if cur - prev > DIVERGENCE_RTOL * max(abs(prev), 1.0):
            raise DivergenceDetected(
                f"loss rose from {prev!r} to {cur!r} at outer iteration {it}", partial=result(False))
        log.debug("outer %d: loss %.10g, dA %.3g, dP %.3g", it, cur, dA, dP)
        if dA <= cfg.epsilon and dP <= cfg.epsilon:
            converged = True
            break
    return result(converged)
