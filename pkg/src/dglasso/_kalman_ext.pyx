# cython: language_level=3
"""Compiled filter/smoother recursions.

Mirrors ``dglasso._kalman_py`` operation for operation. Matrices are small
(tens of rows), so the linear algebra is written as plain loops on
row-major scratch buffers; no BLAS/LAPACK round trips per time step.

Both entry points return a status code as their last element: 0 on success,
otherwise ``-(k + 1)`` where k is the step whose Cholesky factorisation
failed. The Python wrapper turns that into ``NonSPD``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline int _chol(double* a, Py_ssize_t n) noexcept nogil:
    """In-place lower Cholesky of a row-major n x n matrix. Upper part junk."""
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


cdef inline void _chol_solve(const double* L, Py_ssize_t n, double* b, Py_ssize_t m) noexcept nogil:
    """Solve (L L^T) X = B in place; B is n x m row-major."""
    cdef Py_ssize_t i, p, c
    cdef double s
    for c in range(m):
        for i in range(n):
            s = b[i * m + c]
            for p in range(i):
                s -= L[i * n + p] * b[p * m + c]
            b[i * m + c] = s / L[i * n + i]
        for i in range(n - 1, -1, -1):
            s = b[i * m + c]
            for p in range(i + 1, n):
                s -= L[p * n + i] * b[p * m + c]
            b[i * m + c] = s / L[i * n + i]


cdef inline void _symmetrize(double* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.5 * (a[i * n + j] + a[j * n + i])
            a[i * n + j] = s
            a[j * n + i] = s


def kalman_filter_arrays(const double[:, ::1] A, const double[:, ::1] Q,
                         const double[:, :, :] H, const double[:, :, :] R,
                         const double[::1] mu0, const double[:, ::1] Sigma0,
                         const double[:, ::1] Y):
    cdef Py_ssize_t K = Y.shape[0], m = Y.shape[1], n = A.shape[0]
    cdef Py_ssize_t k, i, j, p
    cdef double s, nll = 0.0, logdet, quad
    cdef int status = 0

    mf_a = np.empty((K + 1, n))
    Sf_a = np.empty((K + 1, n, n))
    mp_a = np.empty((K, n))
    Sp_a = np.empty((K, n, n))
    nu_a = np.empty((K, m))
    S_a = np.empty((K, m, m))
    gains_a = np.empty((K, n, m))
    cdef double[:, ::1] mf = mf_a
    cdef double[:, :, ::1] Sf = Sf_a
    cdef double[:, ::1] mp = mp_a
    cdef double[:, :, ::1] Sp = Sp_a
    cdef double[:, ::1] nu = nu_a
    cdef double[:, :, ::1] S_all = S_a
    cdef double[:, :, ::1] gains = gains_a

    cdef double* tmp = <double*> malloc(n * n * sizeof(double))
    cdef double* Spk = <double*> malloc(n * n * sizeof(double))
    cdef double* HS = <double*> malloc(m * n * sizeof(double))
    cdef double* Kt = <double*> malloc(m * n * sizeof(double))
    cdef double* L = <double*> malloc(m * m * sizeof(double))
    cdef double* v = <double*> malloc(m * sizeof(double))
    cdef double* w = <double*> malloc(m * sizeof(double))
    cdef double* mpk = <double*> malloc(n * sizeof(double))

    try:
        with nogil:
            for i in range(n):
                mf[0, i] = mu0[i]
                for j in range(n):
                    Sf[0, i, j] = Sigma0[i, j]

            for k in range(K):
                # predicted moments
                for i in range(n):
                    s = 0.0
                    for p in range(n):
                        s += A[i, p] * mf[k, p]
                    mpk[i] = s
                for i in range(n):
                    for j in range(n):
                        s = 0.0
                        for p in range(n):
                            s += A[i, p] * Sf[k, p, j]
                        tmp[i * n + j] = s
                for i in range(n):
                    for j in range(n):
                        s = Q[i, j]
                        for p in range(n):
                            s += tmp[i * n + p] * A[j, p]
                        Spk[i * n + j] = s
                _symmetrize(Spk, n)

                # observation predictive moments
                for i in range(m):
                    s = 0.0
                    for p in range(n):
                        s += H[k, i, p] * mpk[p]
                    nu[k, i] = s
                    v[i] = Y[k, i] - s
                for i in range(m):
                    for j in range(n):
                        s = 0.0
                        for p in range(n):
                            s += H[k, i, p] * Spk[p * n + j]
                        HS[i * n + j] = s
                for i in range(m):
                    for j in range(m):
                        s = R[k, i, j]
                        for p in range(n):
                            s += HS[i * n + p] * H[k, j, p]
                        L[i * m + j] = s
                _symmetrize(L, m)
                for i in range(m):
                    for j in range(m):
                        S_all[k, i, j] = L[i * m + j]

                if _chol(L, m) != 0:
                    status = -(k + 1)
                    break
                logdet = 0.0
                for i in range(m):
                    logdet += log(L[i * m + i])
                logdet *= 2.0

                for i in range(m * n):
                    Kt[i] = HS[i]
                _chol_solve(L, m, Kt, n)
                for i in range(m):
                    w[i] = v[i]
                _chol_solve(L, m, w, 1)
                quad = 0.0
                for i in range(m):
                    quad += v[i] * w[i]
                nll += 0.5 * (m * log(2.0 * M_PI) + logdet) + 0.5 * quad

                # update
                for i in range(n):
                    s = mpk[i]
                    for p in range(m):
                        s += Kt[p * n + i] * v[p]
                    mf[k + 1, i] = s
                    mp[k, i] = mpk[i]
                for i in range(n):
                    for j in range(n):
                        s = Spk[i * n + j]
                        for p in range(m):
                            s -= Kt[p * n + i] * HS[p * n + j]
                        tmp[i * n + j] = s
                        Sp[k, i, j] = Spk[i * n + j]
                _symmetrize(tmp, n)
                for i in range(n):
                    for j in range(n):
                        Sf[k + 1, i, j] = tmp[i * n + j]
                    for p in range(m):
                        gains[k, i, p] = Kt[p * n + i]
    finally:
        free(tmp)
        free(Spk)
        free(HS)
        free(Kt)
        free(L)
        free(v)
        free(w)
        free(mpk)

    return mf_a, Sf_a, mp_a, Sp_a, nu_a, S_a, gains_a, nll, status


def rts_arrays(const double[:, ::1] A, const double[:, ::1] Q,
               const double[:, ::1] mf, const double[:, :, ::1] Sf):
    cdef Py_ssize_t K = mf.shape[0] - 1, n = A.shape[0]
    cdef Py_ssize_t k, i, j, p
    cdef double s
    cdef int status = 0

    ms_a = np.empty((K + 1, n))
    Ss_a = np.empty((K + 1, n, n))
    G_a = np.empty((K + 1, n, n))
    cdef double[:, ::1] ms = ms_a
    cdef double[:, :, ::1] Ss = Ss_a
    cdef double[:, :, ::1] G = G_a

    cdef double* AS = <double*> malloc(n * n * sizeof(double))
    cdef double* Sn = <double*> malloc(n * n * sizeof(double))
    cdef double* D = <double*> malloc(n * n * sizeof(double))
    cdef double* GD = <double*> malloc(n * n * sizeof(double))
    cdef double* dm = <double*> malloc(n * sizeof(double))

    try:
        with nogil:
            for i in range(n):
                ms[K, i] = mf[K, i]
                for j in range(n):
                    Ss[K, i, j] = Sf[K, i, j]
            for k in range(K, -1, -1):
                for i in range(n):
                    for j in range(n):
                        s = 0.0
                        for p in range(n):
                            s += A[i, p] * Sf[k, p, j]
                        AS[i * n + j] = s
                for i in range(n):
                    for j in range(n):
                        s = Q[i, j]
                        for p in range(n):
                            s += AS[i * n + p] * A[j, p]
                        Sn[i * n + j] = s
                _symmetrize(Sn, n)
                # keep the unfactored prediction for the covariance update
                for i in range(n * n):
                    D[i] = Sn[i]
                if _chol(Sn, n) != 0:
                    status = -(k + 1)
                    break
                # AS <- (S^-)^{-1} A Sf[k]  ==  G_k^T
                _chol_solve(Sn, n, AS, n)
                for i in range(n):
                    for j in range(n):
                        G[k, i, j] = AS[j * n + i]
                if k == K:
                    continue
                for i in range(n):
                    s = ms[k + 1, i]
                    for p in range(n):
                        s -= A[i, p] * mf[k, p]
                    dm[i] = s
                for i in range(n):
                    s = mf[k, i]
                    for p in range(n):
                        s += G[k, i, p] * dm[p]
                    ms[k, i] = s
                for i in range(n * n):
                    D[i] = Ss[k + 1, i // n, i % n] - D[i]
                for i in range(n):
                    for j in range(n):
                        s = 0.0
                        for p in range(n):
                            s += G[k, i, p] * D[p * n + j]
                        GD[i * n + j] = s
                for i in range(n):
                    for j in range(n):
                        s = Sf[k, i, j]
                        for p in range(n):
                            s += GD[i * n + p] * G[k, j, p]
                        D[i * n + j] = s
                _symmetrize(D, n)
                for i in range(n):
                    for j in range(n):
                        Ss[k, i, j] = D[i * n + j]
    finally:
        free(AS)
        free(Sn)
        free(D)
        free(GD)
        free(dm)

    return ms_a, Ss_a, G_a, status
