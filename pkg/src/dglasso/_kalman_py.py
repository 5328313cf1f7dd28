"""Pure numpy implementation of the filter/smoother recursions.

This is the fallback used when the compiled ``_kalman_ext`` module is not
available. Both backends expose the same two functions with identical
signatures and return layouts; ``dglasso._backend`` picks one at import.

Return codes follow the compiled kernel: the functions raise ``NonSPD``
directly here, whereas the extension returns a status that the caller
converts.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import NonSPD

_LOG_2PI = math.log(2.0 * math.pi)


def _sym(M):
    return 0.5 * (M + M.T)


def _chol(M, what):
    try:
        return cho_factor(M, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NonSPD(f"{what} is not positive definite") from exc


def kalman_filter_arrays(A, Q, H, R, mu0, Sigma0, Y):
    """Run the forward recursion.

    Parameters
    ----------
    A, Q : (n, n) arrays
    H : (K, m, n) array (may be a broadcast view)
    R : (K, m, m) array (may be a broadcast view)
    mu0 : (n,) array
    Sigma0 : (n, n) array
    Y : (K, m) array

    Returns
    -------
    tuple
        ``(mf, Sf, mp, Sp, nu, S, gains, nll)`` with filtered moments of
        length K+1 (index 0 is the prior), predicted moments and
        observation-predictive moments of length K, gains of shape
        (K, n, m) and the accumulated negative log-likelihood.
    """
    K, m = Y.shape
    n = A.shape[0]
    mf = np.empty((K + 1, n))
    Sf = np.empty((K + 1, n, n))
    mp = np.empty((K, n))
    Sp = np.empty((K, n, n))
    nu = np.empty((K, m))
    S_all = np.empty((K, m, m))
    gains = np.empty((K, n, m))
    mf[0] = mu0
    Sf[0] = Sigma0
    nll = 0.0
    for k in range(K):
        Hk = H[k]
        m_pred = A @ mf[k]
        S_pred = _sym(A @ Sf[k] @ A.T + Q)
        nu_k = Hk @ m_pred
        v = Y[k] - nu_k
        HS = Hk @ S_pred
        S = _sym(HS @ Hk.T + R[k])
        cf = _chol(S, f"innovation covariance at step {k + 1}")
        Kt = cho_solve(cf, HS, check_finite=False)
        w = cho_solve(cf, v, check_finite=False)
        logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
        nll += 0.5 * (m * _LOG_2PI + logdet) + 0.5 * float(v @ w)
        mf[k + 1] = m_pred + Kt.T @ v
        Sf[k + 1] = _sym(S_pred - Kt.T @ HS)
        mp[k] = m_pred
        Sp[k] = S_pred
        nu[k] = nu_k
        S_all[k] = S
        gains[k] = Kt.T
    return mf, Sf, mp, Sp, nu, S_all, gains, nll


def rts_arrays(A, Q, mf, Sf):
    """Run the backward recursion on filtered moments.

    Returns ``(ms, Ss, G)`` where ``G[k]`` is the smoother gain of step k,
    k = 0..K (the last one uses the one-step-ahead prediction from K).
    """
    K = mf.shape[0] - 1
    n = A.shape[0]
    ms = np.empty_like(mf)
    Ss = np.empty_like(Sf)
    G = np.empty((K + 1, n, n))
    ms[K] = mf[K]
    Ss[K] = Sf[K]
    for k in range(K, -1, -1):
        AS = A @ Sf[k]
        S_next = _sym(AS @ A.T + Q)
        cf = _chol(S_next, f"predicted covariance at step {k + 1}")
        Gk = cho_solve(cf, AS, check_finite=False).T
        G[k] = Gk
        if k == K:
            continue
        ms[k] = mf[k] + Gk @ (ms[k + 1] - A @ mf[k])
        Ss[k] = _sym(Sf[k] + Gk @ (Ss[k + 1] - S_next) @ Gk.T)
    return ms, Ss, G
