"""Builders shared across test modules."""

from __future__ import annotations

import numpy as np

from sccanet.dataset import ExpressionDataset
from sccanet.netweave import EdgeWeightMatrix


def gene_names(p: int) -> tuple[str, ...]:
    return tuple(f"g{i + 1:04d}" for i in range(p))


def random_weights(rng: np.random.Generator, p: int) -> EdgeWeightMatrix:
    """Symmetric nonnegative weights with a zero diagonal."""
    upper = rng.uniform(0.0, 1.0, size=(p, p))
    weights = np.triu(upper, k=1)
    weights = weights + weights.T
    return EdgeWeightMatrix(weights, gene_names(p))


def planted_weights(
    rng: np.random.Generator,
    p: int,
    blocks: tuple[tuple[int, int], ...],
    within: float = 0.9,
    background: float = 0.02,
    jitter: float = 0.01,
) -> EdgeWeightMatrix:
    """Weights with dense diagonal blocks; ``blocks`` are (start, size)."""
    base = np.full((p, p), background)
    for start, size in blocks:
        base[start : start + size, start : start + size] = within
    noise = rng.uniform(0.0, jitter, size=(p, p))
    weights = np.triu(base + noise, k=1)
    weights = weights + weights.T
    return EdgeWeightMatrix(weights, gene_names(p))


def toy_dataset(
    rng: np.random.Generator,
    n_experiments: int = 20,
    n_replicates: int = 3,
    p: int = 12,
    group_size: int = 0,
    group_scale: float = 1.0,
) -> ExpressionDataset:
    """Small replicated dataset, optionally with one correlated gene block."""
    base = rng.standard_normal((n_experiments, p))
    if group_size >= 2:
        shared = rng.standard_normal(n_experiments)
        for j in range(group_size):
            base[:, j] = group_scale * shared + 0.5 * rng.standard_normal(n_experiments)
    values = np.repeat(base[:, None, :], n_replicates, axis=1)
    values = values + 0.01 * rng.standard_normal(values.shape)
    return ExpressionDataset(
        values,
        gene_names(p),
        tuple(f"e{i + 1:02d}" for i in range(n_experiments)),
    )
