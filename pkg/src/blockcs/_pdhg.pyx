# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled primal-dual solver loop (BLAS matrix-vector products).

Mirrors _pdhg_py.pdhg_core; selected automatically at import when built.
"""

import numpy as np

from libc.math cimport INFINITY, sqrt
from scipy.linalg.cython_blas cimport dgemv

BACKEND = "compiled"


def pdhg_core(double[:, ::1] A, double[::1] y, int Q, double epsilon,
              double tau, double sigma, int max_iterations,
              double primal_tol, double dual_tol, int check_every):
    """See _pdhg_py.pdhg_core; identical contract, compiled inner loop."""
    cdef int N = A.shape[0]
    cdef int M = A.shape[1]
    cdef int Rb = M // Q

    x_arr = np.zeros(M)
    ax_arr = np.zeros(N)
    cdef double[::1] x = x_arr
    cdef double[::1] Ax = ax_arr
    cdef double[::1] w = np.zeros(N)
    cdef double[::1] Axbar = np.zeros(N)
    cdef double[::1] ATw = np.zeros(M)
    cdef double[::1] u = np.zeros(N)
    cdef double[::1] w_new = np.zeros(N)
    cdef double[::1] ATw_new = np.zeros(M)
    cdef double[::1] x_new = np.zeros(M)
    cdef double[::1] Ax_new = np.zeros(N)

    cdef char trans_t = b'T'
    cdef char trans_n = b'N'
    cdef int inc = 1
    cdef double one = 1.0
    cdef double zero = 0.0

    cdef double nu, scale, bn, sc, zj, acc, diff
    cdef double prim_res = INFINITY
    cdef double dual_res = INFINITY
    cdef bint converged = False
    cdef int it = 0
    cdef int i, r, j, base

    for it in range(1, max_iterations + 1):
        # Dual step: shrink w + sigma*(A xbar - y) toward the epsilon ball.
        nu = 0.0
        for i in range(N):
            u[i] = w[i] + sigma * (Axbar[i] - y[i])
            nu += u[i] * u[i]
        nu = sqrt(nu)
        scale = 0.0
        if nu > 0.0:
            scale = 1.0 - sigma * epsilon / nu
            if scale < 0.0:
                scale = 0.0
        for i in range(N):
            w_new[i] = scale * u[i]

        # A is C-ordered (N, M): BLAS sees the F-ordered transpose (M, N).
        dgemv(&trans_n, &M, &N, &one, &A[0, 0], &M, &w_new[0], &inc,
              &zero, &ATw_new[0], &inc)

        # Primal step: per-block shrink of x - tau * A^T w_new.
        for r in range(Rb):
            base = r * Q
            bn = 0.0
            for j in range(Q):
                zj = x[base + j] - tau * ATw_new[base + j]
                x_new[base + j] = zj
                bn += zj * zj
            bn = sqrt(bn)
            sc = 0.0
            if bn > tau:
                sc = 1.0 - tau / bn
            for j in range(Q):
                x_new[base + j] *= sc

        dgemv(&trans_t, &M, &N, &one, &A[0, 0], &M, &x_new[0], &inc,
              &zero, &Ax_new[0], &inc)

        if it % check_every == 0 or it == max_iterations:
            acc = 0.0
            for i in range(M):
                diff = (x[i] - x_new[i]) / tau - (ATw[i] - ATw_new[i])
                acc += diff * diff
            prim_res = sqrt(acc)
            acc = 0.0
            for i in range(N):
                diff = (w[i] - w_new[i]) / sigma - (Axbar[i] - Ax_new[i])
                acc += diff * diff
            dual_res = sqrt(acc)
            if prim_res <= primal_tol and dual_res <= dual_tol:
                for i in range(M):
                    x[i] = x_new[i]
                    ATw[i] = ATw_new[i]
                for i in range(N):
                    w[i] = w_new[i]
                    Ax[i] = Ax_new[i]
                converged = True
                break

        for i in range(N):
            Axbar[i] = 2.0 * Ax_new[i] - Ax[i]
            Ax[i] = Ax_new[i]
            w[i] = w_new[i]
        for i in range(M):
            x[i] = x_new[i]
            ATw[i] = ATw_new[i]

    return x_arr, it, prim_res, dual_res, converged, ax_arr
