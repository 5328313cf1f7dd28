# cython: language_level=3
"""Compiled splitting loops for the inner problems.

Mirrors ``dglasso._inner_py`` step for step. Each iteration is a handful of
small dense products, so the loops run on row-major scratch buffers with
no Python calls; the eigendecomposition of the precision branch goes
straight to LAPACK ``dsyev``.

Status codes: 0 converged, 1 iteration cap, 2 objective kept rising,
3 eigensolver failure.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, fabs, INFINITY
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy
from scipy.linalg.cython_lapack cimport dsyev

cnp.import_array()


cdef inline void _mm(const double* a, const double* b, double* c, Py_ssize_t n) noexcept nogil:
    """c = a @ b"""
    cdef Py_ssize_t i, j, p
    cdef double s
    for i in range(n * n):
        c[i] = 0.0
    for i in range(n):
        for p in range(n):
            s = a[i * n + p]
            for j in range(n):
                c[i * n + j] += s * b[p * n + j]


cdef inline void _mtm(const double* a, const double* b, double* c, Py_ssize_t n) noexcept nogil:
    """c = a^T @ b"""
    cdef Py_ssize_t i, j, p
    cdef double s
    for i in range(n * n):
        c[i] = 0.0
    for p in range(n):
        for i in range(n):
            s = a[p * n + i]
            for j in range(n):
                c[i * n + j] += s * b[p * n + j]


cdef inline void _mmt(const double* a, const double* b, double* c, Py_ssize_t n) noexcept nogil:
    """c = a @ b^T"""
    cdef Py_ssize_t i, j, p
    cdef double s
    for i in range(n):
        for j in range(n):
            s = 0.0
            for p in range(n):
                s += a[i * n + p] * b[j * n + p]
            c[i * n + j] = s


cdef inline double _soft(double v, double w) noexcept nogil:
    if v > w:
        return v - w
    if v < -w:
        return v + w
    return 0.0


cdef inline void _symmetrize(double* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.5 * (a[i * n + j] + a[j * n + i])
            a[i * n + j] = s
            a[j * n + i] = s


cdef double _min_subgrad(const double* G, const double* X, double w, Py_ssize_t nn) noexcept nogil:
    cdef Py_ssize_t i
    cdef double r, s = 0.0
    for i in range(nn):
        if X[i] > 0.0:
            r = G[i] + w
        elif X[i] < 0.0:
            r = G[i] - w
        else:
            r = fabs(G[i]) - w
            if r < 0.0:
                r = 0.0
        s += r * r
    return sqrt(s)


cdef int _chol(double* a, Py_ssize_t n) noexcept nogil:
    """In-place lower Cholesky (row-major); upper part left as junk."""
    cdef Py_ssize_t i, j, p
    cdef double s
    for j in range(n):
        s = a[j * n + j]
        for p in range(j):
            s -= a[j * n + p] * a[j * n + p]
        if not (s > 0.0):
            return -1
        s = sqrt(s)
        a[j * n + j] = s
        for i in range(j + 1, n):
            for p in range(j):
                a[i * n + j] -= a[i * n + p] * a[j * n + p]
            a[i * n + j] /= s
    return 0


cdef void _chol_inverse(const double* L, double* out, Py_ssize_t n) noexcept nogil:
    """out = (L L^T)^{-1}, symmetrized."""
    cdef Py_ssize_t i, p, c
    cdef double s
    for i in range(n * n):
        out[i] = 0.0
    for i in range(n):
        out[i * n + i] = 1.0
    for c in range(n):
        for i in range(n):
            s = out[i * n + c]
            for p in range(i):
                s -= L[i * n + p] * out[p * n + c]
            out[i * n + c] = s / L[i * n + i]
        for i in range(n - 1, -1, -1):
            s = out[i * n + c]
            for p in range(i + 1, n):
                s -= L[p * n + i] * out[p * n + c]
            out[i * n + c] = s / L[i * n + i]
    _symmetrize(out, n)


def split_transition(const double[:, ::1] At, const double[:, ::1] Pt,
                     const double[:, ::1] Pinv, const double[:, ::1] U,
                     const double[:, ::1] Vm, const double[:, ::1] inv_denom,
                     const double[:, ::1] C0, const double[:, ::1] Delta,
                     const double[:, ::1] Phi, double tr_const, double scale,
                     double l1w, double vt, double xi, int max_iter, int rise_run):
    cdef Py_ssize_t n = At.shape[0], nn = n * n, i
    cdef int it, n_it = max_iter, status = 1, rises = 0
    cdef double c, prev = 0.0, quad, l1, dist, d
    cdef const double* at = &At[0, 0]
    cdef const double* pt = &Pt[0, 0]
    cdef const double* pinv = &Pinv[0, 0]
    cdef const double* u = &U[0, 0]
    cdef const double* vm = &Vm[0, 0]
    cdef const double* invd = &inv_denom[0, 0]
    cdef const double* c0 = &C0[0, 0]
    cdef const double* dl = &Delta[0, 0]
    cdef const double* phi = &Phi[0, 0]

    X_a = np.empty((n, n))
    Z_a = np.empty((n, n))
    trace_a = np.empty(max_iter)
    cdef double[:, ::1] Xv = X_a
    cdef double[:, ::1] Zv = Z_a
    cdef double[::1] tr = trace_a
    cdef double* X = &Xv[0, 0]
    cdef double* Z = &Zv[0, 0]

    cdef double* V = <double*> malloc(nn * sizeof(double))
    cdef double* W = <double*> malloc(nn * sizeof(double))
    cdef double* C = <double*> malloc(nn * sizeof(double))
    cdef double* T1 = <double*> malloc(nn * sizeof(double))
    cdef double* T2 = <double*> malloc(nn * sizeof(double))
    cdef double* B = <double*> malloc(nn * sizeof(double))
    cdef double* PtD = <double*> malloc(nn * sizeof(double))
    try:
        with nogil:
            memcpy(V, at, nn * sizeof(double))
            _mm(pt, dl, PtD, n)
            for it in range(max_iter):
                for i in range(nn):
                    X[i] = _soft(at[i] - V[i], l1w)
                    W[i] = V[i] + vt * X[i]
                    T1[i] = W[i] / vt
                # Sylvester prox through the cached eigen-factors
                _mm(pinv, T1, C, n)
                for i in range(nn):
                    C[i] += c0[i]
                _mtm(u, C, T1, n)
                _mm(T1, vm, T2, n)
                for i in range(nn):
                    T2[i] *= invd[i]
                _mm(u, T2, T1, n)
                _mmt(T1, vm, Z, n)
                for i in range(nn):
                    V[i] = W[i] - vt * Z[i]

                _mm(pt, X, B, n)
                _mm(B, phi, T1, n)
                quad = tr_const
                l1 = 0.0
                dist = 0.0
                for i in range(nn):
                    quad += T1[i] * X[i] - 2.0 * B[i] * dl[i]
                    l1 += fabs(X[i])
                    d = X[i] - at[i]
                    dist += d * d
                c = scale * quad + l1w * l1 + 0.5 * dist
                tr[it] = c
                if it > 0:
                    if fabs(c - prev) <= xi:
                        for i in range(nn):
                            T2[i] = 2.0 * scale * (T1[i] - PtD[i]) + X[i] - at[i]
                        if _min_subgrad(T2, X, l1w, nn) <= 10.0 * xi:
                            status = 0
                            n_it = it + 1
                            break
                    if c > prev + 1e-12:
                        rises += 1
                    else:
                        rises = 0
                    if rises >= rise_run:
                        status = 2
                        n_it = it + 1
                        break
                prev = c
    finally:
        free(V)
        free(W)
        free(C)
        free(T1)
        free(T2)
        free(B)
        free(PtD)
    return X_a, Z_a, trace_a[:n_it], n_it, status


def split_precision(const double[:, ::1] Pt, const double[:, ::1] Pi, double gamma,
                    double scale, double l1w, double vt, double xi, int max_iter,
                    int rise_run):
    cdef Py_ssize_t n = Pt.shape[0], nn = n * n, i, j, r
    cdef int it, n_it = max_iter, status = 1, rises = 0, info = 0
    cdef int nf = <int> n
    cdef int lwork = <int> (8 * n + 16)
    cdef double c, prev = 0.0, lin, l1, dist, d, logdet, om, root, s
    cdef bint finite, prev_finite = False
    cdef const double* pt = &Pt[0, 0]
    cdef const double* pi = &Pi[0, 0]
    cdef char jobz = b'V'
    cdef char uplo = b'U'

    X_a = np.empty((n, n))
    Z_a = np.empty((n, n))
    trace_a = np.empty(max_iter)
    cdef double[:, ::1] Xv = X_a
    cdef double[:, ::1] Zv = Z_a
    cdef double[::1] tr = trace_a
    cdef double* X = &Xv[0, 0]
    cdef double* Z = &Zv[0, 0]

    cdef double* V = <double*> malloc(nn * sizeof(double))
    cdef double* W = <double*> malloc(nn * sizeof(double))
    cdef double* E = <double*> malloc(nn * sizeof(double))
    cdef double* L = <double*> malloc(nn * sizeof(double))
    cdef double* G = <double*> malloc(nn * sizeof(double))
    cdef double* ev = <double*> malloc(n * sizeof(double))
    cdef double* fv = <double*> malloc(n * sizeof(double))
    cdef double* work = <double*> malloc(lwork * sizeof(double))
    try:
        with nogil:
            memcpy(V, pt, nn * sizeof(double))
            for it in range(max_iter):
                for i in range(nn):
                    X[i] = _soft(pt[i] - V[i], l1w)
                _symmetrize(X, n)
                for i in range(nn):
                    W[i] = V[i] + vt * X[i]
                    E[i] = W[i] / vt - gamma * pi[i]
                _symmetrize(E, n)
                # symmetric input: row- and column-major layouts coincide;
                # eigenvector r comes back as row r of E
                dsyev(&jobz, &uplo, &nf, E, &nf, ev, work, &lwork, &info)
                if info != 0:
                    status = 3
                    n_it = it + 1
                    break
                for r in range(n):
                    om = ev[r]
                    root = sqrt(om * om + 4.0 * gamma)
                    if om >= 0.0:
                        fv[r] = 0.5 * (om + root)
                    else:
                        fv[r] = 2.0 * gamma / (root - om)
                for i in range(n):
                    for j in range(i, n):
                        s = 0.0
                        for r in range(n):
                            s += fv[r] * E[r * n + i] * E[r * n + j]
                        Z[i * n + j] = s
                        Z[j * n + i] = s
                for i in range(nn):
                    V[i] = W[i] - vt * Z[i]

                memcpy(L, X, nn * sizeof(double))
                finite = _chol(L, n) == 0
                if finite:
                    logdet = 0.0
                    for i in range(n):
                        logdet += log(L[i * n + i])
                    logdet *= 2.0
                    lin = 0.0
                    l1 = 0.0
                    dist = 0.0
                    for i in range(nn):
                        lin += X[i] * pi[i]
                        l1 += fabs(X[i])
                        d = X[i] - pt[i]
                        dist += d * d
                    c = scale * (lin - logdet) + l1w * l1 + 0.5 * dist
                else:
                    c = INFINITY
                tr[it] = c
                if it > 0 and finite and prev_finite:
                    if fabs(c - prev) <= xi:
                        _chol_inverse(L, G, n)
                        for i in range(nn):
                            G[i] = scale * (pi[i] - G[i]) + X[i] - pt[i]
                        _symmetrize(G, n)
                        if _min_subgrad(G, X, l1w, nn) <= 10.0 * xi:
                            status = 0
                            n_it = it + 1
                            break
                    if c > prev + 1e-12:
                        rises += 1
                    else:
                        rises = 0
                    if rises >= rise_run:
                        status = 2
                        n_it = it + 1
                        break
                prev = c
                prev_finite = finite
    finally:
        free(V)
        free(W)
        free(E)
        free(L)
        free(G)
        free(ev)
        free(fv)
        free(work)
    return X_a, Z_a, trace_a[:n_it], n_it, status
