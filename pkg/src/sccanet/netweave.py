"""Edge-weight matrices from repeated sparse CCA on random gene partitions.

One round b draws a replicate per experiment, normalizes the matrix, and
subsamples floor(s * p) genes. The subsample is split T times into two
random halves; each split is solved by the sparse CCA solver and the
absolute weights are averaged over splits into a profile c_b. The round
contributes the rank-one matrix A_b = c_b c_b' (diagonal zeroed); rounds are
averaged and the result is scaled by its maximum entry:

    A_bar = (1 / B) * sum_b A_b,   A_bar /= max(A_bar).

Genes that co-occur in solver supports across many random splits accumulate
large pairwise weights; unrelated genes do not.

Scale convention: normalized matrices carry unit-norm columns, so their
cross products are correlations in [-1, 1]. Before solving, columns are
multiplied by sqrt(n - 1), putting inner products on the (n - 1) *
correlation scale that the penalty levels used throughout this package
(single digits to low hundreds) are calibrated against.

Seeds derive from one root: replicate draws and subsamples use per-round
streams, partition t of round b uses the stream counter b * T + t, so any
work unit is reproducible in isolation and rounds can be computed in any
order (results are reduced in round order regardless of worker count).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ._backend import kernels
from .dataset import ExpressionDataset, draw_replicates
from .errors import DegenerateInputError, DimensionMismatchError, ValidationError
from .knorm import fit_normalization, normalize, standardize_columns
from .rng import (
    STREAM_PARTITION,
    STREAM_REPLICATE_DRAW,
    STREAM_SUBSAMPLE,
    child_rng,
    child_seed,
)
from .scca import PenaltyPair, scca_solve


@dataclass(frozen=True)
class WeaveConfig:
    """Knobs for one weave run. ``workers`` caps process-level parallelism
    over rounds without affecting results."""

    penalties: PenaltyPair
    subsample_fraction: float = 0.7
    n_partitions: int = 100
    n_rounds: int = 50
    rng_seed: int = 0
    skip_normalization: bool = False
    shrinkage: float = 0.5
    tol: float = 1e-6
    max_iter: int = 200
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValidationError(
                f"subsample_fraction must lie in (0, 1], got {self.subsample_fraction}"
            )
        if self.n_partitions < 1:
            raise ValidationError("n_partitions must be >= 1")
        if self.n_rounds < 1:
            raise ValidationError("n_rounds must be >= 1")
        if not self.tol > 0.0:
            raise ValidationError("tol must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if not 0.0 <= self.shrinkage <= 1.0:
            raise ValidationError("shrinkage must lie in [0, 1]")


@dataclass(frozen=True)
class EdgeWeightMatrix:
    """Symmetric nonnegative gene-by-gene weights with a zero diagonal."""

    weights: np.ndarray
    gene_ids: tuple[str, ...]

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise DimensionMismatchError(f"weights must be square, got {weights.shape}")
        p = weights.shape[0]
        if len(self.gene_ids) != p:
            raise DimensionMismatchError(
                f"{len(self.gene_ids)} gene ids for {p} genes"
            )
        if len(set(self.gene_ids)) != p:
            raise ValidationError("gene ids are not unique")
        if not np.all(np.isfinite(weights)):
            raise ValidationError("weights contain NaN or infinity")
        if np.abs(weights - weights.T).max() > 1e-12:
            raise ValidationError("weights are not symmetric")
        if np.abs(np.diagonal(weights)).max() > 1e-12:
            raise ValidationError("diagonal must be zero")
        if weights.min() < 0.0:
            raise ValidationError("weights must be nonnegative")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))

    @property
    def n_genes(self) -> int:
        return self.weights.shape[0]


def random_partition(
    gene_indices: np.ndarray, rng_seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into two random halves; the first gets ceil(m/2)."""
    gene_indices = np.asarray(gene_indices)
    m = gene_indices.shape[0]
    if m < 2:
        raise ValidationError("need at least 2 genes to partition")
    perm = child_rng(rng_seed).permutation(m)
    half = (m + 1) // 2
    return gene_indices[perm[:half]], gene_indices[perm[half:]]


def _check_standardized(z: np.ndarray) -> np.ndarray:
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionMismatchError("expected a 2-axis matrix")
    if not np.all(np.isfinite(z)):
        raise DegenerateInputError("matrix contains NaN or infinity")
    means = np.abs(z.mean(axis=0))
    norms = np.linalg.norm(z, axis=0)
    if means.max() > 1e-6 or np.abs(norms - 1.0).max() > 1e-6:
        raise ValidationError(
            "columns must be centered with unit norm (normalize or "
            "standardize_columns first)"
        )
    return z


def _solver_scale(z: np.ndarray) -> np.ndarray:
    # Unit-norm columns -> unit sample sd, so cross products sit on the
    # (n - 1) * correlation scale the penalty grids assume.
    return z * math.sqrt(z.shape[0] - 1)


def partition_weights(
    z_star: np.ndarray,
    side_x: np.ndarray,
    side_y: np.ndarray,
    penalties: PenaltyPair,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> np.ndarray:
    """Absolute solver weights for one explicit partition, mapped back to
    the full gene axis (zeros elsewhere). Mostly useful for diagnostics."""
    z = _solver_scale(_check_standardized(z_star))
    side_x = np.asarray(side_x, dtype=np.int64)
    side_y = np.asarray(side_y, dtype=np.int64)
    if np.intersect1d(side_x, side_y).size:
        raise ValidationError("partition sides overlap")
    solution = scca_solve(z[:, side_x], z[:, side_y], penalties, tol, max_iter)
    c = np.zeros(z.shape[1])
    c[side_x] = np.abs(solution.b)
    c[side_y] = np.abs(solution.a)
    return c


def _round_plan(p: int, cfg: WeaveConfig, b_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Subsample indices and partition permutations for round ``b_index``."""
    m = int(math.floor(cfg.subsample_fraction * p))
    if m < 4:
        raise ValidationError(
            f"subsample of {m} genes is too small to partition (need >= 4)"
        )
    if m < p:
        rng = child_rng(cfg.rng_seed, STREAM_SUBSAMPLE, b_index)
        indices = np.sort(rng.choice(p, size=m, replace=False))
    else:
        indices = np.arange(p)
    perms = np.empty((cfg.n_partitions, m), dtype=np.int64)
    base = b_index * cfg.n_partitions
    for t in range(cfg.n_partitions):
        perms[t] = child_rng(cfg.rng_seed, STREAM_PARTITION, base + t).permutation(m)
    return indices, perms


def weave_weights(z_star: np.ndarray, cfg: WeaveConfig, b_index: int = 0) -> np.ndarray:
    """Partition-averaged absolute weight profile c_b for one round.

    ``z_star`` must be column-standardized (knorm output). Genes outside the
    round's subsample get weight zero.
    """
    z = _check_standardized(z_star)
    p = z.shape[1]
    indices, perms = _round_plan(p, cfg, b_index)
    half = (indices.shape[0] + 1) // 2
    z_sub = np.ascontiguousarray(_solver_scale(z)[:, indices])
    c_sub = kernels.weave_round_kernel(
        z_sub,
        perms,
        half,
        cfg.penalties.lambda1,
        cfg.penalties.lambda2,
        cfg.tol,
        cfg.max_iter,
    )
    c = np.zeros(p)
    c[indices] = c_sub
    return c


def weave_once(z_star: np.ndarray, cfg: WeaveConfig, b_index: int = 0) -> np.ndarray:
    """Single-round matrix A_b = c_b c_b' with a zero diagonal (not
    normalized; :func:`weave` scales the round average)."""
    c = weave_weights(z_star, cfg, b_index)
    a = np.outer(c, c)
    np.fill_diagonal(a, 0.0)
    return a


def _round_matrix(z_source: ExpressionDataset, cfg: WeaveConfig, b_index: int) -> np.ndarray:
    draw = draw_replicates(
        z_source, child_seed(cfg.rng_seed, STREAM_REPLICATE_DRAW, b_index)
    )
    if cfg.skip_normalization:
        z = standardize_columns(draw.matrix)
    else:
        z = normalize(draw.matrix, fit_normalization(draw.matrix, cfg.shrinkage))
    return weave_once(z, cfg, b_index)


def weave(z_source: ExpressionDataset, cfg: WeaveConfig) -> EdgeWeightMatrix:
    """Full estimate: average A_b over rounds and scale by the max entry.

    Deterministic for a given config and seed. Emits a warning and returns
    the zero matrix when every round produced only zero solutions (penalties
    too large for the data scale).
    """
    p = z_source.n_genes
    rounds = range(cfg.n_rounds)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            matrices = list(
                pool.map(_round_matrix, [z_source] * cfg.n_rounds, [cfg] * cfg.n_rounds, rounds)
            )
    else:
        matrices = [_round_matrix(z_source, cfg, b) for b in rounds]
    total = np.zeros((p, p))
    for matrix in matrices:  # fixed reduction order, independent of workers
        total += matrix
    total /= cfg.n_rounds
    peak = total.max()
    if peak > 0.0:
        total /= peak
    else:
        warnings.warn(
            "all rounds produced zero solutions; edge weights are identically "
            "zero (penalties likely too large)",
            stacklevel=2,
        )
    return EdgeWeightMatrix(total, z_source.gene_ids)


def entropy(a: EdgeWeightMatrix | np.ndarray) -> float:
    """Shannon entropy of the upper-triangle weight distribution.

    Weights are normalized by their sum; zero entries are skipped. The zero
    matrix gets +inf so it always loses a smallest-entropy comparison.
    """
    weights = a.weights if isinstance(a, EdgeWeightMatrix) else np.asarray(a)
    iu = np.triu_indices(weights.shape[0], k=1)
    upper = weights[iu]
    total = upper.sum()
    if total <= 0.0:
        return math.inf
    q = upper[upper > 0.0] / total
    return float(-(q * np.log(q)).sum())


def select_penalties(
    z_source: ExpressionDataset,
    cfg_template: WeaveConfig,
    grid: list[PenaltyPair] | list[tuple[float, float]],
    keep: int,
) -> list[tuple[PenaltyPair, EdgeWeightMatrix]]:
    """Weave once per grid point (same seed, so draws are shared) and keep
    the ``keep`` pairs with the smallest entropy, ties broken by
    (lambda1, lambda2)."""
    pairs = [
        pair if isinstance(pair, PenaltyPair) else PenaltyPair(*pair) for pair in grid
    ]
    if not pairs:
        raise ValidationError("penalty grid is empty")
    if not 1 <= keep <= len(pairs):
        raise ValidationError(
            f"keep must lie in [1, {len(pairs)}], got {keep}"
        )
    scored = []
    for pair in pairs:
        matrix = weave(z_source, replace(cfg_template, penalties=pair))
        scored.append((entropy(matrix), pair.lambda1, pair.lambda2, pair, matrix))
    scored.sort(key=lambda item: item[:3])
    return [(pair, matrix) for _, _, _, pair, matrix in scored[:keep]]
