# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled solver kernels.

Mirror of `sccanet._core_py`: same update rule, same stopping conditions,
same return values. Any behavioral change must be applied to both backends.
Matrix products go through BLAS (scipy.linalg.cython_blas); the C-order
arrays are handed to Fortran BLAS as their own transposes.
"""

import numpy as np

from libc.math cimport fabs, sqrt
from scipy.linalg.cython_blas cimport dgemm, dgemv

BACKEND_NAME = "compiled"


cdef inline double _soft(double x, double t) noexcept nogil:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


cdef void _cross_product(double[:, ::1] x, double[:, ::1] y, double[:, ::1] k) noexcept nogil:
    # k (q2, q1) C-order holds Y'X; Fortran sees the buffers transposed, so
    # this is dgemm computing X'Y in Fortran layout.
    cdef int n = x.shape[0]
    cdef int q1 = x.shape[1]
    cdef int q2 = y.shape[1]
    cdef double one = 1.0
    cdef double zero = 0.0
    dgemm("N", "T", &q1, &q2, &n, &one, &x[0, 0], &q1, &y[0, 0], &q2,
          &zero, &k[0, 0], &q1)


cdef void _nipals(double[:, ::1] k, double lambda1, double lambda2,
                  double tol, int max_iter,
                  double[::1] a, double[::1] b,
                  double[::1] a_prev, double[::1] b_prev,
                  double[::1] u, double[::1] v, double[::1] trace,
                  double* objective, int* iterations, int* converged) noexcept nogil:
    cdef int q2 = k.shape[0]
    cdef int q1 = k.shape[1]
    cdef int i, j, it, j0
    cdef int inc = 1
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef double best, s, a_norm, b_norm, change, c, obj

    # Initial b: indicator of the X column with the largest cross-product
    # column norm; exact ties resolved by the lowest index.
    j0 = 0
    best = -1.0
    for j in range(q1):
        s = 0.0
        for i in range(q2):
            s += k[i, j] * k[i, j]
        s = sqrt(s)
        if s > best:
            best = s
            j0 = j
    for j in range(q1):
        b[j] = 0.0
    b[j0] = 1.0
    for i in range(q2):
        a[i] = 0.0

    objective[0] = 0.0
    iterations[0] = 0
    converged[0] = 0
    for it in range(max_iter):
        for i in range(q2):
            a_prev[i] = a[i]
        for j in range(q1):
            b_prev[j] = b[j]
        # u = K b  (Fortran buffer is K', so trans="T")
        dgemv("T", &q1, &q2, &one, &k[0, 0], &q1, &b[0], &inc, &zero, &u[0], &inc)
        a_norm = 0.0
        for i in range(q2):
            c = _soft(u[i], lambda2)
            a[i] = c
            a_norm += c * c
        a_norm = sqrt(a_norm)
        if a_norm > 0.0:
            for i in range(q2):
                a[i] /= a_norm
        # v = K' a
        dgemv("N", &q1, &q2, &one, &k[0, 0], &q1, &a[0], &inc, &zero, &v[0], &inc)
        b_norm = 0.0
        for j in range(q1):
            c = _soft(v[j], lambda1)
            b[j] = c
            b_norm += c * c
        b_norm = sqrt(b_norm)
        if a_norm == 0.0 or b_norm == 0.0:
            # Zero solution is absorbing: report it and stop.
            for i in range(q2):
                a[i] = 0.0
            for j in range(q1):
                b[j] = 0.0
            objective[0] = 0.0
            iterations[0] = it + 1
            trace[it] = 0.0
            converged[0] = 1
            return
        obj = 0.0
        for j in range(q1):
            b[j] /= b_norm
            obj += v[j] * b[j]
        objective[0] = obj
        iterations[0] = it + 1
        trace[it] = obj
        change = 0.0
        for i in range(q2):
            c = fabs(a[i] - a_prev[i])
            if c > change:
                change = c
        for j in range(q1):
            c = fabs(b[j] - b_prev[j])
            if c > change:
                change = c
        if change < tol:
            converged[0] = 1
            return


def scca_solve_kernel(x, y, double lambda1, double lambda2, double tol,
                      int max_iter):
    """Solve one instance. Returns (a, b, objective, iterations, converged,
    objective_trace)."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    if xv.shape[0] != yv.shape[0]:
        raise ValueError("x and y must have the same number of rows")
    if xv.shape[1] < 1 or yv.shape[1] < 1 or xv.shape[0] < 1:
        raise ValueError("x and y must be nonempty")
    cdef int q1 = xv.shape[1]
    cdef int q2 = yv.shape[1]
    k_arr = np.empty((q2, q1))
    a_arr = np.zeros(q2)
    b_arr = np.zeros(q1)
    trace_arr = np.empty(max_iter)
    cdef double[:, ::1] kv = k_arr
    cdef double[::1] av = a_arr
    cdef double[::1] bv = b_arr
    cdef double[::1] a_prev = np.empty(q2)
    cdef double[::1] b_prev = np.empty(q1)
    cdef double[::1] uv = np.empty(q2)
    cdef double[::1] vv = np.empty(q1)
    cdef double[::1] tracev = trace_arr
    cdef double objective = 0.0
    cdef int iterations = 0
    cdef int converged = 0
    with nogil:
        _cross_product(xv, yv, kv)
        _nipals(kv, lambda1, lambda2, tol, max_iter, av, bv, a_prev, b_prev,
                uv, vv, tracev, &objective, &iterations, &converged)
    return (a_arr, b_arr, objective, iterations, bool(converged),
            trace_arr[:iterations].copy())


def weave_round_kernel(z, perms, int half, double lambda1, double lambda2,
                       double tol, int max_iter):
    """Average |weight| profile over the partitions of one round.

    z is (n, m); perms is (T, m), each row a permutation of 0..m-1 whose
    first ``half`` entries form the X side. Returns the length-m average of
    absolute solver weights mapped back to column positions.
    """
    cdef double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef long long[:, ::1] pv = np.ascontiguousarray(perms, dtype=np.int64)
    cdef int n = zv.shape[0]
    cdef int m = zv.shape[1]
    cdef int n_partitions = pv.shape[0]
    if pv.shape[1] != m:
        raise ValueError("perms row length must equal the column count of z")
    if half < 1 or half >= m:
        raise ValueError("half must split columns into two nonempty sides")
    cdef int q1 = half
    cdef int q2 = m - half
    cbar_arr = np.zeros(m)
    cdef double[::1] cbar = cbar_arr
    cdef double[:, ::1] xbuf = np.empty((n, q1))
    cdef double[:, ::1] ybuf = np.empty((n, q2))
    cdef double[:, ::1] kv = np.empty((q2, q1))
    cdef double[::1] av = np.empty(q2)
    cdef double[::1] bv = np.empty(q1)
    cdef double[::1] a_prev = np.empty(q2)
    cdef double[::1] b_prev = np.empty(q1)
    cdef double[::1] uv = np.empty(q2)
    cdef double[::1] vv = np.empty(q1)
    cdef double[::1] tracev = np.empty(max_iter)
    cdef double objective = 0.0
    cdef int iterations = 0
    cdef int converged = 0
    cdef int t, e, j
    cdef long long col
    with nogil:
        for t in range(n_partitions):
            for j in range(q1):
                col = pv[t, j]
                for e in range(n):
                    xbuf[e, j] = zv[e, col]
            for j in range(q2):
                col = pv[t, half + j]
                for e in range(n):
                    ybuf[e, j] = zv[e, col]
            _cross_product(xbuf, ybuf, kv)
            _nipals(kv, lambda1, lambda2, tol, max_iter, av, bv, a_prev,
                    b_prev, uv, vv, tracev, &objective, &iterations,
                    &converged)
            for j in range(q1):
                cbar[pv[t, j]] += fabs(bv[j])
            for j in range(q2):
                cbar[pv[t, half + j]] += fabs(av[j])
        for j in range(m):
            cbar[j] /= n_partitions
    return cbar_arr
