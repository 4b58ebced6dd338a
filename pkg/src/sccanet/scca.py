"""Sparse canonical correlation between two gene blocks.

Given column-standardized matrices X (n x q1) and Y (n x q2), the solver
maximizes a' Y'X b subject to unit-ball constraints on a and b with L1
penalties lambda2 on a and lambda1 on b. The alternating update is

    u = Y'X b,  a = unit(soft_threshold(u, lambda2))
    v = X'Y a,  b = unit(soft_threshold(v, lambda1))

where unit() scales a nonzero vector to the unit sphere (the exact maximizer
of each penalized subproblem over the ball) and leaves the zero vector
alone. Large enough penalties drive both vectors to the all-zero solution,
which is reported with objective 0 and converged=True.

The initialization is deterministic: b starts as the indicator of the X
column whose cross-product column Y'x_j has the largest norm, with exact
ties broken by the lowest index, so rng_seed does not influence the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import DegenerateInputError, DimensionMismatchError


@dataclass(frozen=True)
class PenaltyPair:
    """L1 penalty levels: lambda1 applies to b (the X side), lambda2 to a
    (the Y side)."""

    lambda1: float
    lambda2: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0.0:
                raise DegenerateInputError(f"{name} must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)

    def as_tuple(self) -> tuple[float, float]:
        return (self.lambda1, self.lambda2)


@dataclass(frozen=True)
class SccaSolution:
    """Solver output. ``a`` weights the Y columns, ``b`` the X columns;
    ``objective_trace`` holds the objective after each full iteration."""

    a: np.ndarray
    b: np.ndarray
    objective: float
    iterations: int
    converged: bool
    objective_trace: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        trace = (
            np.asarray(self.objective_trace, dtype=np.float64)
            if self.objective_trace is not None
            else np.empty(0)
        )
        for arr in (a, b, trace):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "objective_trace", trace)


def soft_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    """Elementwise soft threshold: shrink toward zero by ``threshold``,
    clipping to zero. Preserves shape; threshold must be >= 0."""
    if threshold < 0.0 or not np.isfinite(threshold):
        raise DegenerateInputError(f"threshold must be finite and >= 0, got {threshold}")
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def _validate_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2:
        raise DimensionMismatchError("x and y must be 2-axis matrices")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"x has {x.shape[0]} rows but y has {y.shape[0]}"
        )
    if x.shape[0] < 2:
        raise DimensionMismatchError("need at least 2 rows")
    if x.shape[1] < 1 or y.shape[1] < 1:
        raise DimensionMismatchError("x and y must each have at least one column")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInputError("x or y contains NaN or infinity")
    return x, y


def scca_solve(
    x: np.ndarray,
    y: np.ndarray,
    penalties: PenaltyPair,
    tol: float = 1e-6,
    max_iter: int = 200,
    rng_seed: int = 0,
) -> SccaSolution:
    """Run the alternating solver on one (X, Y) instance.

    ``rng_seed`` is accepted for interface stability; the algorithm is
    deterministic (see module docstring).
    """
    del rng_seed
    x, y = _validate_pair(x, y)
    if not tol > 0.0:
        raise DegenerateInputError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise DegenerateInputError(f"max_iter must be >= 1, got {max_iter}")
    a, b, objective, iterations, converged, trace = kernels.scca_solve_kernel(
        x, y, penalties.lambda1, penalties.lambda2, float(tol), int(max_iter)
    )
    return SccaSolution(
        a=a,
        b=b,
        objective=float(objective),
        iterations=int(iterations),
        converged=bool(converged),
        objective_trace=trace,
    )
