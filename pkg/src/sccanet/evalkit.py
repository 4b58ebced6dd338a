"""Cluster recovery scoring against known gene groups.

Each truth group is matched to the predicted cluster with the largest
overlap; precision and recall are computed per group. Precision is
undefined (NaN) when the matched cluster is empty or no cluster exists;
undefined values are excluded from averages but counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Collection, Mapping, Sequence

import numpy as np

from .errors import DegenerateInputError, DimensionMismatchError, ValidationError
from .netweave import EdgeWeightMatrix


@dataclass(frozen=True)
class GroupScore:
    """Recovery of one truth group by its best-overlapping cluster."""

    group: str
    matched_cluster: int | None
    n_true: int
    n_predicted: int
    n_overlap: int
    precision: float
    recall: float


@dataclass(frozen=True)
class EvalReport:
    """Per-group scores plus metadata identifying the scored run."""

    per_group: tuple[GroupScore, ...]
    method_tag: str = ""
    seeds: tuple[int, ...] = ()
    config_digest: str = ""

    @property
    def mean_precision(self) -> float:
        """Mean over groups with defined precision; NaN if none."""
        defined = [s.precision for s in self.per_group if not math.isnan(s.precision)]
        return float(np.mean(defined)) if defined else math.nan

    @property
    def mean_recall(self) -> float:
        return float(np.mean([s.recall for s in self.per_group]))

    @property
    def undefined_precision_count(self) -> int:
        return sum(1 for s in self.per_group if math.isnan(s.precision))


def _as_cluster_list(predicted) -> list[set[str]]:
    clusters = [set(map(str, cluster)) for cluster in predicted]
    return clusters


def _as_truth_mapping(truth) -> dict[str, set[str]]:
    if isinstance(truth, Mapping):
        return {str(name): set(map(str, genes)) for name, genes in truth.items()}
    return {f"group{i + 1}": set(map(str, genes)) for i, genes in enumerate(truth)}


def score(
    predicted: Sequence[Collection[str]],
    truth: Mapping[str, Collection[str]] | Sequence[Collection[str]],
    method_tag: str = "",
    seeds: tuple[int, ...] = (),
    config_digest: str = "",
) -> EvalReport:
    """Score predicted clusters against named truth groups.

    Matching is greedy per truth group and not injective: two groups may
    match the same cluster. Overlap ties go to the cluster with the lower
    index. Empty predictions leave precision undefined and recall zero.
    """
    clusters = _as_cluster_list(predicted)
    groups = _as_truth_mapping(truth)
    if not groups:
        raise ValidationError("truth must contain at least one group")
    for name, genes in groups.items():
        if not genes:
            raise ValidationError(f"truth group {name!r} is empty")
    scores = []
    for name, genes in groups.items():
        best_index: int | None = None
        best_overlap = -1
        for index, cluster in enumerate(clusters):
            overlap = len(genes & cluster)
            if overlap > best_overlap:
                best_index = index
                best_overlap = overlap
        if best_index is None:
            scores.append(
                GroupScore(
                    group=name,
                    matched_cluster=None,
                    n_true=len(genes),
                    n_predicted=0,
                    n_overlap=0,
                    precision=math.nan,
                    recall=0.0,
                )
            )
            continue
        cluster = clusters[best_index]
        overlap = len(genes & cluster)
        precision = overlap / len(cluster) if cluster else math.nan
        recall = overlap / len(genes)
        scores.append(
            GroupScore(
                group=name,
                matched_cluster=best_index,
                n_true=len(genes),
                n_predicted=len(cluster),
                n_overlap=overlap,
                precision=precision,
                recall=recall,
            )
        )
    return EvalReport(
        per_group=tuple(scores),
        method_tag=method_tag,
        seeds=tuple(seeds),
        config_digest=config_digest,
    )


def pearson_matrix(
    z: np.ndarray, gene_ids: tuple[str, ...] | None = None
) -> EdgeWeightMatrix:
    """Absolute Pearson correlation between gene columns, zero diagonal,
    scaled so the largest entry is 1. Baseline counterpart of the weave."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-axis matrix, got {z.shape}")
    if z.shape[0] < 2:
        raise ValidationError("need at least 2 rows for correlations")
    if not np.all(np.isfinite(z)):
        raise ValidationError("matrix contains non-finite entries")
    sd = z.std(axis=0)
    if np.any(sd == 0.0):
        raise DegenerateInputError("constant gene column has no correlation")
    weights = np.abs(np.corrcoef(z, rowvar=False))
    np.fill_diagonal(weights, 0.0)
    peak = weights.max()
    if peak > 0.0:
        weights = weights / peak
    weights = (weights + weights.T) / 2.0
    if gene_ids is None:
        gene_ids = tuple(f"g{i + 1:04d}" for i in range(z.shape[1]))
    return EdgeWeightMatrix(weights=weights, gene_ids=tuple(gene_ids))
