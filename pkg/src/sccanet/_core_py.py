"""Numpy implementation of the solver kernels.

This is the fallback backend; `sccanet._core` is the compiled twin. Both
implement the same alternating update, so results agree to floating-point
noise and any fix must be applied to both.

The solver maximizes a' Y'X b over unit balls with L1 penalties applied by
soft-thresholding. Each half-step solves its penalized subproblem exactly:
soft-threshold the gradient and, when the result is nonzero, scale it to the
unit sphere. Iteration stops when the largest elementwise change of (a, b)
falls below tol, when both vectors hit zero (absorbing), or at max_iter.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _soft(values: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def _nipals(K, lambda1, lambda2, tol, max_iter):
    """Alternating solve on the cross-product matrix K = Y'X (q2 x q1)."""
    q2, q1 = K.shape
    j0 = int(np.argmax(np.sqrt((K * K).sum(axis=0))))
    b = np.zeros(q1)
    b[j0] = 1.0
    a = np.zeros(q2)
    trace = np.empty(max_iter)
    objective = 0.0
    converged = False
    iterations = 0
    for it in range(max_iter):
        a_prev = a
        b_prev = b
        u = K @ b
        a_raw = _soft(u, lambda2)
        a_norm = np.sqrt(a_raw @ a_raw)
        v_zero = a_norm == 0.0
        a = a_raw / a_norm if not v_zero else a_raw
        v = K.T @ a
        b_raw = _soft(v, lambda1)
        b_norm = np.sqrt(b_raw @ b_raw)
        if v_zero or b_norm == 0.0:
            a = np.zeros(q2)
            b = np.zeros(q1)
            objective = 0.0
            iterations = it + 1
            trace[it] = 0.0
            converged = True
            break
        b = b_raw / b_norm
        objective = float(v @ b)
        iterations = it + 1
        trace[it] = objective
        change = max(
            float(np.max(np.abs(a - a_prev))), float(np.max(np.abs(b - b_prev)))
        )
        if change < tol:
            converged = True
            break
    return a, b, objective, iterations, converged, trace[:iterations].copy()


def scca_solve_kernel(x, y, lambda1, lambda2, tol, max_iter):
    """Solve one instance. Returns (a, b, objective, iterations, converged,
    objective_trace)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    K = y.T @ x
    return _nipals(K, lambda1, lambda2, tol, max_iter)


def weave_round_kernel(z, perms, half, lambda1, lambda2, tol, max_iter):
    """Average |weight| profile over the partitions of one round.

    z is (n, m); perms is (T, m), each row a permutation of 0..m-1 whose
    first ``half`` entries form the X side. Returns the length-m average of
    absolute solver weights mapped back to column positions.
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    perms = np.asarray(perms)
    n_partitions, m = perms.shape
    cbar = np.zeros(m)
    for t in range(n_partitions):
        side_x = perms[t, :half]
        side_y = perms[t, half:]
        a, b, _, _, _, _ = scca_solve_kernel(
            z[:, side_x], z[:, side_y], lambda1, lambda2, tol, max_iter
        )
        cbar[side_x] += np.abs(b)
        cbar[side_y] += np.abs(a)
    cbar /= n_partitions
    return cbar
