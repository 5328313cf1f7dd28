"""Filtering, smoothing and likelihood evaluation for the linear-Gaussian SSM.

The model is::

    x_k = A x_{k-1} + q_k,   q_k ~ N(0, P^{-1})
    y_k = H_k x_k + r_k,     r_k ~ N(0, R_k)
    x_0 ~ N(mu0, Sigma0)

The transition matrix ``A`` and the state-noise precision ``P`` are the
quantities being estimated elsewhere in the package; everything else is the
known observation model, bundled in :class:`ObservationModel`.

The time recursions run in a compiled kernel when available (see
``dglasso._backend``); the rest is vectorised numpy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from . import _backend
from .errors import DimensionMismatch, NonSPD

SYM_TOL = 1e-12


def _as_matrix(M, name):
    M = np.ascontiguousarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {M.shape}")
    return M


def _check_spd(M, name):
    nrm = np.linalg.norm(M)
    if np.linalg.norm(M - M.T) > SYM_TOL * max(nrm, 1e-300):
        raise NonSPD(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NonSPD(f"{name} is not positive definite") from exc


def spd_inverse(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Inverse of an SPD matrix through Cholesky, symmetrized."""
    try:
        cf = cho_factor(M, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NonSPD(f"{name} is not positive definite") from exc
    inv = cho_solve(cf, np.eye(M.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)


def clip_spectral(M: np.ndarray, cap: float) -> np.ndarray:
    """Project onto the spectral-norm ball of radius ``cap`` (clip singular values)."""
    U, s, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    return (U * np.minimum(s, cap)) @ Vt


def is_spd(M: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return bool(np.all(np.isfinite(M)))


@dataclass(frozen=True)
class ObservationModel:
    """Known part of the model: observation maps, noise covariances, prior.

    ``H`` and ``R`` may be single matrices (time-invariant) or stacks of
    shape ``(K, Ny, Nx)`` / ``(K, Ny, Ny)``.
    """

    H: np.ndarray
    R: np.ndarray
    mu0: np.ndarray
    Sigma0: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        R = np.asarray(self.R, dtype=float)
        mu0 = np.ascontiguousarray(self.mu0, dtype=float).reshape(-1)
        Sigma0 = _as_matrix(self.Sigma0, "Sigma0")
        if H.ndim not in (2, 3) or R.ndim not in (2, 3):
            raise DimensionMismatch("H and R must be matrices or stacks of matrices")
        ny, nx = H.shape[-2:]
        if R.shape[-2:] != (ny, ny):
            raise DimensionMismatch(f"R has shape {R.shape}, expected (..., {ny}, {ny})")
        if Sigma0.shape != (nx, nx) or mu0.shape != (nx,):
            raise DimensionMismatch("mu0/Sigma0 do not match the state dimension of H")
        _check_spd(Sigma0, "Sigma0")
        for Rk in (R if R.ndim == 3 else [R]):
            _check_spd(Rk, "R")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "Sigma0", Sigma0)

    @property
    def nx(self) -> int:
        return self.H.shape[-1]

    @property
    def ny(self) -> int:
        return self.H.shape[-2]

    def stacked(self, K: int):
        """Return ``(H, R)`` as ``(K, ...)`` arrays (broadcast views if constant)."""
        H, R = self.H, self.R
        if H.ndim == 2:
            H = np.broadcast_to(H, (K,) + H.shape)
        elif H.shape[0] != K:
            raise DimensionMismatch(f"H has {H.shape[0]} steps, series has {K}")
        if R.ndim == 2:
            R = np.broadcast_to(R, (K,) + R.shape)
        elif R.shape[0] != K:
            raise DimensionMismatch(f"R has {R.shape[0]} steps, series has {K}")
        return H, R


@dataclass(frozen=True)
class ModelParams:
    """Full parameter bundle: the estimated pair ``(A, P)`` plus the known part."""

    A: np.ndarray
    P: np.ndarray
    obs: ObservationModel
    validate: bool = True

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        P = _as_matrix(self.P, "P")
        nx = self.obs.nx
        if A.shape != (nx, nx) or P.shape != (nx, nx):
            raise DimensionMismatch(
                f"A {A.shape} and P {P.shape} must both be ({nx}, {nx})")
        if self.validate:
            _check_spd(P, "P")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "P", P)

    @classmethod
    def from_arrays(cls, A, P, H, R, mu0, Sigma0, validate=True) -> "ModelParams":
        return cls(A, P, ObservationModel(H, R, mu0, Sigma0), validate=validate)

    @property
    def Q(self) -> np.ndarray:
        return spd_inverse(self.P, "P")


@dataclass(frozen=True)
class TimeSeries:
    """Observations ``y_1..y_K`` (rows) and, for simulated data, states ``x_0..x_K``."""

    observations: np.ndarray
    states: Optional[np.ndarray] = None

    def __post_init__(self):
        Y = np.ascontiguousarray(self.observations, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.ndim != 2 or Y.shape[0] < 1:
            raise DimensionMismatch("observations must be a non-empty (K, Ny) array")
        object.__setattr__(self, "observations", Y)
        if self.states is not None:
            X = np.asarray(self.states, dtype=float)
            if X.ndim == 1:
                X = X[:, None]
            if X.shape[0] != Y.shape[0] + 1:
                raise DimensionMismatch("states must have K+1 rows (x_0..x_K)")
            object.__setattr__(self, "states", X)

    @property
    def K(self) -> int:
        return self.observations.shape[0]


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class FilterOutput:
    """Forward-pass results.

    Filtered arrays have K+1 rows (row 0 is the prior ``(mu0, Sigma0)``);
    predicted, innovation and gain arrays have K rows, row ``k-1`` holding
    step k.
    """

    filtered_means: np.ndarray
    filtered_covs: np.ndarray
    predicted_means: np.ndarray
    predicted_covs: np.ndarray
    innovations: np.ndarray
    innovation_means: np.ndarray
    innovation_covs: np.ndarray
    gains: np.ndarray
    neg_loglik: float

    @property
    def K(self) -> int:
        return self.predicted_means.shape[0]

    def filtered(self, k: int) -> GaussianBelief:
        return GaussianBelief(self.filtered_means[k], self.filtered_covs[k])

    def predicted(self, k: int) -> GaussianBelief:
        """Predictive belief of step k (1-based, as in the recursion)."""
        return GaussianBelief(self.predicted_means[k - 1], self.predicted_covs[k - 1])

    def recompute_neg_loglik(self) -> float:
        """Sum the per-step Gaussian terms from the stored innovations."""
        total = 0.0
        for v, S in zip(self.innovations, self.innovation_covs):
            _, logdet = np.linalg.slogdet(2.0 * np.pi * S)
            total += 0.5 * logdet + 0.5 * float(v @ np.linalg.solve(S, v))
        return total


@dataclass(frozen=True)
class SmootherOutput:
    smoothed_means: np.ndarray
    smoothed_covs: np.ndarray
    gains: np.ndarray

    def smoothed(self, k: int) -> GaussianBelief:
        return GaussianBelief(self.smoothed_means[k], self.smoothed_covs[k])


@dataclass(frozen=True)
class SmoothingStats:
    """Second-order smoothing moments defining the quadratic surrogate.

    ``Psi``: average of E[x_k x_k^T], ``Delta``: average of E[x_k x_{k-1}^T],
    ``Phi``: average of E[x_{k-1} x_{k-1}^T], all over k = 1..K.
    ``neg_loglik`` is the likelihood at the point where they were computed,
    a free by-product of the forward pass.
    """

    Psi: np.ndarray
    Delta: np.ndarray
    Phi: np.ndarray
    K: int
    neg_loglik: float = float("nan")

    def residual_cov(self, A: np.ndarray) -> np.ndarray:
        """``Psi - Delta A^T - A Delta^T + A Phi A^T``, symmetrized."""
        M = self.Psi - self.Delta @ A.T - A @ self.Delta.T + A @ self.Phi @ A.T
        return 0.5 * (M + M.T)


def _prepare(params: ModelParams, series: TimeSeries):
    Y = series.observations
    K, ny = Y.shape
    if ny != params.obs.ny:
        raise DimensionMismatch(f"series has Ny={ny}, model expects {params.obs.ny}")
    H, R = params.obs.stacked(K)
    Q = spd_inverse(params.P, "P")
    return Q, H, R, Y


def kalman_filter(params: ModelParams, series: TimeSeries, backend: str | None = None) -> FilterOutput:
    """Forward Kalman recursion with the likelihood accumulated on the way.

    ``Q = P^{-1}`` is formed once by Cholesky inversion. Covariances are
    symmetrized after every update.

    Raises
    ------
    NonSPD
        If ``P`` or an innovation covariance fails Cholesky.
    DimensionMismatch
        If the series and model dimensions disagree.
    """
    Q, H, R, Y = _prepare(params, series)
    filt, _ = _backend.get_kernels(backend)
    mf, Sf, mp, Sp, nu, S, gains, nll = filt(
        params.A, Q, H, R, params.obs.mu0, params.obs.Sigma0, Y)
    return FilterOutput(mf, Sf, mp, Sp, Y - nu, nu, S, gains, float(nll))


def rts_smoother(params: ModelParams, filt: FilterOutput, backend: str | None = None) -> SmootherOutput:
    """Backward Rauch-Tung-Striebel pass over the filtered moments.

    Uses the standard form on filtered quantities:
    ``ms_k = mf_k + G_k (ms_{k+1} - A mf_k)`` with
    ``G_k = Sf_k A^T (A Sf_k A^T + Q)^{-1}``. ``gains[K]`` is the gain that
    would link step K to a hypothetical K+1.
    """
    Q = spd_inverse(params.P, "P")
    _, rts = _backend.get_kernels(backend)
    ms, Ss, G = rts(params.A, Q, np.ascontiguousarray(filt.filtered_means),
                    np.ascontiguousarray(filt.filtered_covs))
    return SmootherOutput(ms, Ss, G)


def marginal_negloglik(params: ModelParams, series: TimeSeries, backend: str | None = None) -> float:
    """Negative log marginal likelihood ``-log p(y_1:K | A, P)``."""
    return kalman_filter(params, series, backend).neg_loglik


def stats_from_smoother(sm: SmootherOutput, neg_loglik: float = float("nan")) -> SmoothingStats:
    ms, Ss, G = sm.smoothed_means, sm.smoothed_covs, sm.gains
    K = ms.shape[0] - 1
    cur_m, prev_m = ms[1:], ms[:-1]
    Psi = (Ss[1:].sum(axis=0) + cur_m.T @ cur_m) / K
    Phi = (Ss[:-1].sum(axis=0) + prev_m.T @ prev_m) / K
    # lag-one cross moments: Cov(x_k, x_{k-1} | y) = Ss_k G_{k-1}^T
    cross = np.einsum("kij,klj->il", Ss[1:], G[:-1])
    Delta = (cross + cur_m.T @ prev_m) / K
    Psi = 0.5 * (Psi + Psi.T)
    Phi = 0.5 * (Phi + Phi.T)
    return SmoothingStats(Psi, Delta, Phi, K, neg_loglik)


def smoothing_stats(params: ModelParams, series: TimeSeries, backend: str | None = None) -> SmoothingStats:
    """Filter, smooth and reduce to the surrogate statistics at ``params``."""
    filt = kalman_filter(params, series, backend)
    sm = rts_smoother(params, filt, backend)
    return stats_from_smoother(sm, filt.neg_loglik)


def simulate_states(A, Q, obs: ObservationModel, K: int, rng: np.random.Generator):
    """Draw ``(x_0..x_K, y_1..y_K)`` from the model. Used by ``datagen``."""
    nx, ny = obs.nx, obs.ny
    H, R = obs.stacked(K)
    try:
        LQ = np.linalg.cholesky(Q)
        L0 = np.linalg.cholesky(obs.Sigma0)
    except np.linalg.LinAlgError as exc:
        raise NonSPD("state-noise or prior covariance is not positive definite") from exc
    X = np.empty((K + 1, nx))
    Yobs = np.empty((K, ny))
    X[0] = obs.mu0 + L0 @ rng.standard_normal(nx)
    const_R = obs.R.ndim == 2
    LR = np.linalg.cholesky(obs.R) if const_R else None
    for k in range(1, K + 1):
        X[k] = A @ X[k - 1] + LQ @ rng.standard_normal(nx)
        Lr = LR if const_R else np.linalg.cholesky(R[k - 1])
        Yobs[k - 1] = H[k - 1] @ X[k] + Lr @ rng.standard_normal(ny)
    return X, Yobs
