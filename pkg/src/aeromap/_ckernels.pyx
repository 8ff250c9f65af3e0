# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; same contracts as ``_kernels_py``."""

import numpy as np
from libc.math cimport sqrt, fabs


def quad_forms(const double complex[:, ::1] S, const double complex[:, ::1] K):
    # columns of S are read contiguously from the transpose; K is Hermitian,
    # so Re(s* K s) = sum_i K_ii |s_i|^2 + 2 Re sum_{i<j} conj(s_i) K_ij s_j
    cdef const double complex[:, ::1] T = np.ascontiguousarray(np.asarray(S).T)
    cdef Py_ssize_t M = S.shape[0], N = S.shape[1], n, i, j
    cdef double complex row, si
    cdef double acc, diag
    out = np.empty(N, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for n in range(N):
            acc = 0.0
            diag = 0.0
            for i in range(M):
                si = T[n, i]
                diag = diag + K[i, i].real * (si.real * si.real + si.imag * si.imag)
                row = 0
                for j in range(i + 1, M):
                    row = row + K[i, j] * T[n, j]
                acc = acc + (si.conjugate() * row).real
            o[n] = diag + 2.0 * acc
    return out


def gram_abs2(const double complex[:, ::1] S):
    cdef const double complex[:, ::1] T = np.ascontiguousarray(np.asarray(S).T)
    cdef Py_ssize_t M = S.shape[0], N = S.shape[1], n, p, i
    cdef double re, im
    cdef double complex a, c
    out = np.empty((N, N), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for n in range(N):
            for p in range(n, N):
                re = 0.0
                im = 0.0
                for i in range(M):
                    a = T[n, i]
                    c = T[p, i]
                    re = re + a.real * c.real + a.imag * c.imag
                    im = im + a.real * c.imag - a.imag * c.real
                o[n, p] = re * re + im * im
                o[p, n] = o[n, p]
    return out


def gs_solve(const double[:, ::1] A, const double[::1] b, double[::1] x,
             Py_ssize_t max_sweeps, double tol, double stagnation_tol):
    cdef Py_ssize_t n = b.shape[0], i, j, sweep, sweeps = 0
    cdef double acc, new, change, size, res, bnorm = 0.0
    cdef int code = 0
    residuals = np.zeros(max_sweeps, dtype=np.float64)
    cdef double[::1] hist = residuals
    for i in range(n):
        bnorm += b[i] * b[i]
    bnorm = sqrt(bnorm)
    with nogil:
        for sweep in range(max_sweeps):
            change = 0.0
            size = 0.0
            for i in range(n):
                acc = b[i]
                for j in range(n):
                    if j != i:
                        acc = acc - A[i, j] * x[j]
                new = acc / A[i, i]
                if new < 0.0:
                    new = 0.0
                if fabs(new - x[i]) > change:
                    change = fabs(new - x[i])
                x[i] = new
                if fabs(new) > size:
                    size = fabs(new)
            sweeps = sweep + 1
            res = 0.0
            for i in range(n):
                acc = -b[i]
                for j in range(n):
                    acc = acc + A[i, j] * x[j]
                res += acc * acc
            res = sqrt(res) / bnorm if bnorm > 0 else 0.0
            hist[sweep] = res
            if res <= tol:
                code = 1
                break
            if change <= stagnation_tol * size:
                code = 2
                break
    status = ("max_iter", "converged", "stagnant")[code]
    return sweeps, residuals[:sweeps].copy(), status
