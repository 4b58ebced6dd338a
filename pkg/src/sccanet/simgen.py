"""Synthetic expression data with planted gene groups.

The generator draws a matrix-normal expression matrix whose row covariance
couples experiments and whose column covariance contains planted blocks of
correlated genes, then rewrites part of each block as positive linear
combinations of the remaining members and adds replicate-level noise. A
small fixed seven-gene construction with a tunable feedback loop is also
provided for end-to-end sanity checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import ExpressionDataset
from .errors import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    ValidationError,
)
from .rng import (
    STREAM_SIM_EXPERIMENT,
    STREAM_SIM_GENE,
    STREAM_SIM_MATRIX,
    STREAM_SIM_NOISE,
    child_rng,
)

_EIGENVALUE_FLOOR = 1e-6


@dataclass(frozen=True)
class SimulationSpec:
    """Parameters of the planted-group generator.

    ``groups`` gives the sizes of correlated gene groups laid out
    consecutively from the first gene column; remaining genes are
    independent noise. ``dependency_level`` is the fraction of experiments
    given correlated rows. Each group is designated ``"high"`` or ``"low"``
    (``group_designations``, default all high), and its within-group
    correlations are drawn uniformly from the matching range; the
    experiment block always uses ``high_range``.
    """

    n_genes: int = 500
    n_experiments: int = 30
    n_replicates: int = 5
    groups: tuple[int, ...] = (15,)
    dependency_level: float = 0.0
    high_range: tuple[float, float] = (0.5, 0.6)
    low_range: tuple[float, float] = (0.1, 0.2)
    group_designations: tuple[str, ...] | None = None
    replicate_noise_sd: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(int(k) for k in self.groups))
        object.__setattr__(self, "high_range", tuple(self.high_range))
        object.__setattr__(self, "low_range", tuple(self.low_range))
        if self.group_designations is None:
            object.__setattr__(self, "group_designations", ("high",) * len(self.groups))
        else:
            object.__setattr__(
                self, "group_designations", tuple(str(d) for d in self.group_designations)
            )
        if self.n_genes < 1 or self.n_experiments < 2 or self.n_replicates < 1:
            raise ValidationError("need n_genes >= 1, n_experiments >= 2, n_replicates >= 1")
        if any(k < 2 for k in self.groups):
            raise ValidationError("every group needs at least 2 genes")
        if sum(self.groups) > self.n_genes:
            raise ValidationError("groups exceed the number of genes")
        if not 0.0 <= self.dependency_level <= 1.0:
            raise ValidationError("dependency_level must lie in [0, 1]")
        for name in ("high_range", "low_range"):
            low, high = getattr(self, name)
            if not 0.0 < low <= high < 1.0:
                raise ValidationError(f"{name} must satisfy 0 < low <= high < 1")
        if len(self.group_designations) != len(self.groups):
            raise ValidationError("group_designations must match the number of groups")
        if any(d not in ("high", "low") for d in self.group_designations):
            raise ValidationError("group designations must be 'high' or 'low'")
        if self.replicate_noise_sd < 0.0:
            raise ValidationError("replicate_noise_sd must be >= 0")


def _repair_correlation(matrix: np.ndarray) -> np.ndarray:
    """Clip eigenvalues from below and rescale to unit diagonal.

    Random correlation entries can make the matrix indefinite; flooring the
    spectrum at a small positive value keeps Cholesky factorization viable
    while barely moving the entries.
    """
    matrix = (matrix + matrix.T) / 2.0
    eigenvalues = np.linalg.eigvalsh(matrix)
    if eigenvalues.min() < _EIGENVALUE_FLOOR:
        values, vectors = np.linalg.eigh(matrix)
        values = np.maximum(values, _EIGENVALUE_FLOOR)
        matrix = (vectors * values) @ vectors.T
        scale = np.sqrt(np.diagonal(matrix))
        matrix = matrix / np.outer(scale, scale)
        matrix = (matrix + matrix.T) / 2.0
        np.fill_diagonal(matrix, 1.0)
    return matrix


def make_experiment_correlation(spec: SimulationSpec) -> np.ndarray:
    """Row (experiment) correlation with one correlated leading block.

    The block covers round(dependency_level * n_experiments) experiments
    and is filled with values from ``high_range``; the rest of the matrix
    is the identity.
    """
    n = spec.n_experiments
    matrix = np.eye(n)
    n_dependent = int(round(spec.dependency_level * n))
    if n_dependent >= 2:
        rng = child_rng(spec.rng_seed, STREAM_SIM_EXPERIMENT)
        low, high = spec.high_range
        for i in range(n_dependent):
            for j in range(i + 1, n_dependent):
                value = rng.uniform(low, high)
                matrix[i, j] = value
                matrix[j, i] = value
        matrix = _repair_correlation(matrix)
    return matrix


def make_gene_correlation(spec: SimulationSpec) -> np.ndarray:
    """Column (gene) correlation with one block per planted group.

    Each within-group entry is drawn uniformly from the group's designated
    range (high or low); genes outside the groups stay independent.
    Indefinite blocks are repaired in place.
    """
    p = spec.n_genes
    matrix = np.eye(p)
    rng = child_rng(spec.rng_seed, STREAM_SIM_GENE)
    offset = 0
    for size, designation in zip(spec.groups, spec.group_designations):
        low, high = spec.high_range if designation == "high" else spec.low_range
        block = np.eye(size)
        for i in range(size):
            for j in range(i + 1, size):
                value = rng.uniform(low, high)
                block[i, j] = value
                block[j, i] = value
        block = _repair_correlation(block)
        matrix[offset : offset + size, offset : offset + size] = block
        offset += size
    return matrix


def group_gene_indices(spec: SimulationSpec) -> tuple[tuple[int, ...], ...]:
    """Column indices of each planted group, in block order."""
    indices = []
    offset = 0
    for size in spec.groups:
        indices.append(tuple(range(offset, offset + size)))
        offset += size
    return tuple(indices)


def combination_gene_indices(spec: SimulationSpec) -> tuple[tuple[int, ...], ...]:
    """Per group, the trailing ceil(size / 3) columns rewritten as
    combinations of the other members."""
    rewritten = []
    for block in group_gene_indices(spec):
        n_combo = math.ceil(len(block) / 3)
        rewritten.append(block[len(block) - n_combo :])
    return tuple(rewritten)


def _default_gene_ids(p: int) -> tuple[str, ...]:
    width = max(4, len(str(p)))
    return tuple(f"g{i + 1:0{width}d}" for i in range(p))


def _default_experiment_labels(n: int) -> tuple[str, ...]:
    width = max(2, len(str(n)))
    return tuple(f"e{i + 1:0{width}d}" for i in range(n))


def simulate(spec: SimulationSpec) -> ExpressionDataset:
    """Draw a replicated dataset with the planted structure of ``spec``.

    The base matrix is L_E G L_G' with G standard normal, giving a
    matrix-normal draw with row covariance Sigma_E and column covariance
    Sigma_G. Within each group, the trailing third of the genes is replaced
    by positive linear combinations (uniform weights normalized to sum 1)
    of the leading members. Replicates are copies of the base matrix plus
    independent N(0, replicate_noise_sd^2) noise.
    """
    sigma_e = make_experiment_correlation(spec)
    sigma_g = make_gene_correlation(spec)
    chol_e = np.linalg.cholesky(sigma_e)
    chol_g = np.linalg.cholesky(sigma_g)
    rng_matrix = child_rng(spec.rng_seed, STREAM_SIM_MATRIX)
    base = chol_e @ rng_matrix.standard_normal((spec.n_experiments, spec.n_genes)) @ chol_g.T

    rng_combo = child_rng(spec.rng_seed, STREAM_SIM_GENE, 1)
    for block, rewritten in zip(group_gene_indices(spec), combination_gene_indices(spec)):
        donors = [g for g in block if g not in set(rewritten)]
        for gene in rewritten:
            weights = rng_combo.uniform(0.5, 1.5, size=len(donors))
            weights /= weights.sum()
            base[:, gene] = base[:, donors] @ weights

    rng_noise = child_rng(spec.rng_seed, STREAM_SIM_NOISE)
    values = np.repeat(base[:, None, :], spec.n_replicates, axis=1)
    values += spec.replicate_noise_sd * rng_noise.standard_normal(values.shape)
    return ExpressionDataset(
        values=values,
        gene_ids=_default_gene_ids(spec.n_genes),
        experiment_labels=_default_experiment_labels(spec.n_experiments),
    )


def partial_correlation(precision: np.ndarray, i: int, j: int) -> float:
    """Partial correlation of variables i and j given all others, from the
    precision (inverse covariance) matrix."""
    precision = np.asarray(precision, dtype=np.float64)
    if precision.ndim != 2 or precision.shape[0] != precision.shape[1]:
        raise DimensionMismatchError(f"precision must be square, got {precision.shape}")
    if not np.all(np.isfinite(precision)):
        raise ValidationError("precision contains non-finite entries")
    if np.abs(precision - precision.T).max() > 1e-8:
        raise ValidationError("precision must be symmetric")
    p = precision.shape[0]
    if not (0 <= i < p and 0 <= j < p):
        raise ValidationError(f"indices must lie in 0..{p - 1}")
    if np.linalg.eigvalsh(precision).min() <= 0.0:
        raise NotPositiveDefiniteError("precision must be positive definite")
    if i == j:
        return 1.0
    return float(-precision[i, j] / math.sqrt(precision[i, i] * precision[j, j]))


MINIMAL_EXAMPLE_GENES = ("x", "y", "z", "u", "v", "p", "q")


def minimal_example_dataset(
    n_experiments: int = 500,
    eps: float = 0.05,
    delta: float = 0.05,
    noise_sd: float = 0.05,
    rng_seed: int = 0,
) -> ExpressionDataset:
    """Seven genes where z sums two inputs and u mirrors v, with weak
    feedback between z and u.

    x, y, v, p, q are independent standard normals. z and u solve

        z = x + y + eps * (u + v + p) + noise
        u = delta * (x + y + z + q) + v + noise

    which is a linear system in (z, u); eps = delta = 0 recovers the exact
    relations z = x + y and u = v (plus noise). One replicate per
    experiment.
    """
    if not (0.0 <= eps <= 0.1 and 0.0 <= delta <= 0.1):
        raise ValidationError("eps and delta must lie in [0, 0.1]")
    if noise_sd < 0.0:
        raise ValidationError("noise_sd must be >= 0")
    if n_experiments < 2:
        raise ValidationError("need at least 2 experiments")
    rng = child_rng(rng_seed, STREAM_SIM_MATRIX)
    x, y, v, p_, q = rng.standard_normal((5, n_experiments))
    eta = noise_sd * rng.standard_normal((2, n_experiments))
    # Solve [[1, -eps], [-delta, 1]] @ [z, u] = [rhs_z, rhs_u].
    rhs_z = x + y + eps * (v + p_) + eta[0]
    rhs_u = delta * (x + y + q) + v + eta[1]
    determinant = 1.0 - eps * delta
    z = (rhs_z + eps * rhs_u) / determinant
    u = (delta * rhs_z + rhs_u) / determinant
    values = np.stack([x, y, z, u, v, p_, q], axis=1)[:, None, :]
    return ExpressionDataset(
        values=values,
        gene_ids=MINIMAL_EXAMPLE_GENES,
        experiment_labels=_default_experiment_labels(n_experiments),
    )


def minimal_example_covariance(
    eps: float = 0.05, delta: float = 0.05, noise_sd: float = 0.05
) -> np.ndarray:
    """Analytic covariance of the seven-gene construction.

    Every gene is a linear map of the independent sources
    (x, y, v, p, q, eta_z, eta_u), so the covariance is B D B' with D the
    diagonal of source variances.
    """
    if not (0.0 <= eps <= 0.1 and 0.0 <= delta <= 0.1):
        raise ValidationError("eps and delta must lie in [0, 0.1]")
    if noise_sd < 0.0:
        raise ValidationError("noise_sd must be >= 0")
    determinant = 1.0 - eps * delta
    # Source order: x, y, v, p, q, eta_z, eta_u.
    rhs_z = np.array([1.0, 1.0, eps, eps, 0.0, 1.0, 0.0])
    rhs_u = np.array([delta, delta, 1.0, 0.0, delta, 0.0, 1.0])
    z_row = (rhs_z + eps * rhs_u) / determinant
    u_row = (delta * rhs_z + rhs_u) / determinant
    coefficients = np.vstack(
        [
            np.eye(7)[0],  # x
            np.eye(7)[1],  # y
            z_row,
            u_row,
            np.eye(7)[2],  # v
            np.eye(7)[3],  # p
            np.eye(7)[4],  # q
        ]
    )
    variances = np.ones(7)
    variances[5] = noise_sd**2
    variances[6] = noise_sd**2
    return coefficients @ np.diag(variances) @ coefficients.T
