# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stage iteration for the built-in right-hand sides."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs, hypot, isfinite

cnp.import_array()

cdef enum:
    KEPLER = 1
    QUARTIC = 2
    LINEAR = 3

cdef enum:
    CONVERGED = 0
    MAXITER = 1
    NONFINITE = 2
    COLLISION = 3

cdef double COLLISION_RADIUS = 1e-8


cdef int _rhs(int kind, const double[::1] par, double[:, ::1] U, double[:, ::1] F) noexcept nogil:
    cdef Py_ssize_t i, k = U.shape[0]
    cdef double rad, inv3
    if kind == KEPLER:
        for i in range(k):
            rad = hypot(U[i, 0], U[i, 1])
            if rad < COLLISION_RADIUS:
                return COLLISION
            inv3 = 1.0 / (rad * rad * rad)
            F[i, 0] = U[i, 2]
            F[i, 1] = U[i, 3]
            F[i, 2] = -U[i, 0] * inv3
            F[i, 3] = -U[i, 1] * inv3
    elif kind == QUARTIC:
        for i in range(k):
            F[i, 0] = U[i, 1]
            F[i, 1] = -U[i, 0] * U[i, 0] * U[i, 0]
    elif kind == LINEAR:
        for i in range(k):
            F[i, 0] = par[0] * U[i, 0] - par[1] * U[i, 1]
            F[i, 1] = par[1] * U[i, 0] + par[0] * U[i, 1]
    return CONVERGED


def supported(int kind):
    return kind in (KEPLER, QUARTIC, LINEAR)


def fixed_point(const double[:, ::1] A, const double[::1] y0, double h, double tol,
                int max_iter, int kind, const double[::1] params):
    """Same contract as the pure-Python ``fixed_point`` for a built-in rhs."""
    cdef Py_ssize_t k = A.shape[0], m = y0.shape[0]
    cdef Py_ssize_t i, j, d
    cdef int it = 0, status = MAXITER, rc
    cdef double thresh, res = INFINITY, acc, diff, ymax = 0.0
    U_arr = np.empty((k, m))
    V_arr = np.empty((k, m))
    F_arr = np.empty((k, m))
    cdef double[:, ::1] U = U_arr
    cdef double[:, ::1] V = V_arr
    cdef double[:, ::1] F = F_arr
    cdef double[:, ::1] tmp

    for d in range(m):
        if fabs(y0[d]) > ymax:
            ymax = fabs(y0[d])
    thresh = tol * (1.0 + ymax)
    with nogil:
        for i in range(k):
            for d in range(m):
                U[i, d] = y0[d]
        while it < max_iter:
            it += 1
            rc = _rhs(kind, params, U, F)
            if rc != CONVERGED:
                status = rc
                break
            res = 0.0
            for i in range(k):
                for d in range(m):
                    acc = 0.0
                    for j in range(k):
                        acc = acc + A[i, j] * F[j, d]
                    V[i, d] = y0[d] + h * acc
                    if not isfinite(V[i, d]):
                        status = NONFINITE
                    diff = fabs(V[i, d] - U[i, d])
                    if diff > res:
                        res = diff
            tmp = U
            U = V
            V = tmp
            if status == NONFINITE:
                res = INFINITY
                break
            if res <= thresh:
                status = CONVERGED
                break
        if status == CONVERGED or status == MAXITER:
            rc = _rhs(kind, params, U, F)
            if rc != CONVERGED:
                status = rc
            else:
                for i in range(k):
                    for d in range(m):
                        if not isfinite(F[i, d]):
                            status = NONFINITE
    return np.asarray(U).copy(), np.asarray(F).copy(), it, status, res
