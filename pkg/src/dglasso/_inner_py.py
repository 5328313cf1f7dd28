"""Pure numpy splitting loops for the two inner problems.

Fallback for ``dglasso._inner_ext``; both expose the same functions with
the same arguments and return ``(X, Z, trace, iterations, status)`` where
status is 0 (converged), 1 (iteration cap) or 2 (objective kept rising).
"""

from __future__ import annotations

import math

import numpy as np

CONVERGED, MAX_ITER, STALLED = 0, 1, 2


def _soft(V, w):
    return np.sign(V) * np.maximum(np.abs(V) - w, 0.0)


def _min_subgrad(G, X, w):
    R = np.where(X != 0, G + w * np.sign(X), np.maximum(np.abs(G) - w, 0.0))
    return float(np.linalg.norm(R))


def _run(anchor, step, objective, certify, vt, xi, max_iter, rise_run):
    V = anchor.copy()
    trace = np.empty(max_iter)
    prev = math.nan
    rises = 0
    X = Z = anchor
    for it in range(max_iter):
        X, Z, V = step(V)
        c = objective(X)
        trace[it] = c
        if it > 0 and math.isfinite(c) and math.isfinite(prev):
            if abs(c - prev) <= xi and certify(X) <= 10.0 * xi:
                return X, Z, trace[:it + 1], it + 1, CONVERGED
            rises = rises + 1 if c > prev + 1e-12 else 0
            if rises >= rise_run:
                return X, Z, trace[:it + 1], it + 1, STALLED
        prev = c
    return X, Z, trace, max_iter, MAX_ITER


def split_transition(At, Pt, Pinv, U, Vm, inv_denom, C0, Delta, Phi, tr_const,
                     scale, l1w, vt, xi, max_iter, rise_run):
    """Splitting loop for the transition update.

    ``U``, ``Vm`` and ``inv_denom`` are the cached eigen-factors of the
    Sylvester operator and ``C0 = 2 gamma Delta`` its constant term.
    ``tr_const`` is ``tr(P~ Psi)``.
    """
    PtD = Pt @ Delta

    def step(V):
        X = _soft(At - V, l1w)
        W = V + vt * X
        C = C0 + Pinv @ (W / vt)
        Z = U @ ((U.T @ C @ Vm) * inv_denom) @ Vm.T
        return X, Z, W - vt * Z

    def objective(A):
        B = Pt @ A
        D = A - At
        quad = tr_const - 2.0 * float(np.sum(B * Delta)) + float(np.sum((B @ Phi) * A))
        return scale * quad + l1w * float(np.abs(A).sum()) + 0.5 * float(np.sum(D * D))

    def certify(A):
        G = 2.0 * scale * (Pt @ A @ Phi - PtD) + A - At
        return _min_subgrad(G, A, l1w)

    return _run(At, step, objective, certify, vt, xi, max_iter, rise_run)


def split_precision(Pt, Pi, gamma, scale, l1w, vt, xi, max_iter, rise_run):
    """Splitting loop for the precision update."""

    def step(V):
        X = _soft(Pt - V, l1w)
        X = 0.5 * (X + X.T)
        W = V + vt * X
        M = W / vt - gamma * Pi
        omega, Q = np.linalg.eigh(0.5 * (M + M.T))
        root = np.sqrt(omega * omega + 4.0 * gamma)
        f = np.where(omega >= 0, 0.5 * (omega + root), 2.0 * gamma / (root - omega))
        Z = (Q * f) @ Q.T
        Z = 0.5 * (Z + Z.T)
        return X, Z, W - vt * Z

    def objective(P):
        try:
            L = np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            return math.inf
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        D = P - Pt
        return (scale * (float(np.sum(P * Pi)) - logdet) + l1w * float(np.abs(P).sum())
                + 0.5 * float(np.sum(D * D)))

    def certify(P):
        Pinv = np.linalg.inv(P)
        G = scale * (Pi - 0.5 * (Pinv + Pinv.T)) + P - Pt
        return _min_subgrad(0.5 * (G + G.T), P, l1w)

    return _run(Pt, step, objective, certify, vt, xi, max_iter, rise_run)
