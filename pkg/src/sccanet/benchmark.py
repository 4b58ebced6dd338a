"""Planted-group recovery benchmark.

Simulates replicated datasets at several experiment-dependency levels,
recovers modules with the weave + hierarchical-cut pipeline and with a
plain Pearson-correlation baseline, scores both against the planted
groups, and aggregates mean precision/recall per (pathway, dependency
level, method) into a CSV table. An optional block-model sweep over
discretization thresholds can be added to the same table.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

from .community import (
    CommunityResult,
    discretize,
    hc_cut,
    hc_ward,
    majority_vote,
    sbm_fit,
    sbm_select,
)
from .dataset import draw_replicates
from .errors import CutNotFoundError, ValidationError
from .evalkit import EvalReport, pearson_matrix, score
from .knorm import fit_normalization, normalize
from .netweave import EdgeWeightMatrix, WeaveConfig, select_penalties
from .rng import STREAM_REPLICATE_DRAW, child_seed
from .scca import PenaltyPair
from .simgen import SimulationSpec, group_gene_indices, simulate

DEFAULT_GRID = tuple(
    PenaltyPair(l1, l2) for l1 in (9, 12, 15, 18, 21, 24, 27) for l2 in (9, 12, 15, 18, 21, 24, 27)
)


@dataclass(frozen=True)
class BenchmarkConfig:
    """Scenario and pipeline knobs for one benchmark run.

    ``base_weave`` carries the round/partition counts and subsample
    fraction shared by every grid point; its penalties field is replaced by
    each grid entry in turn.
    """

    simulation: SimulationSpec = SimulationSpec(
        n_genes=500, n_experiments=30, n_replicates=5, groups=(15, 15)
    )
    dependency_levels: tuple[float, ...] = (0.0, 0.33, 0.67)
    seeds: tuple[int, ...] = tuple(range(10))
    grid: tuple[PenaltyPair, ...] = DEFAULT_GRID
    keep: int = 10
    base_weave: WeaveConfig = WeaveConfig(
        penalties=PenaltyPair(9.0, 9.0),
        subsample_fraction=0.7,
        n_partitions=100,
        n_rounds=50,
    )
    small_cluster_size: int = 25
    sbm_thresholds: tuple[float, ...] = ()
    sbm_q: int = 3

    def __post_init__(self):
        if not self.dependency_levels:
            raise ValidationError("need at least one dependency level")
        if not self.seeds:
            raise ValidationError("need at least one seed")
        if not self.simulation.groups:
            raise ValidationError("benchmark needs planted groups to score against")


def _truth_groups(spec: SimulationSpec) -> dict[str, set[str]]:
    gene_ids = [f"g{i + 1:0{max(4, len(str(spec.n_genes)))}d}" for i in range(spec.n_genes)]
    return {
        f"pathway{k + 1}": {gene_ids[i] for i in block}
        for k, block in enumerate(group_gene_indices(spec))
    }


def _selected_clusters(result: CommunityResult) -> list[set[str]]:
    return [set(result.block_members(block)) for block in result.selected_blocks]


def weave_hc_clusters(
    dataset,
    grid: tuple[PenaltyPair, ...],
    keep: int,
    base_weave: WeaveConfig,
    small_cluster_size: int,
    min_small_clusters: int,
) -> list[set[str]]:
    """Module candidates from the weave + hierarchical pipeline.

    The penalty grid is reduced to the ``keep`` lowest-entropy matrices;
    each is cut by the small-cluster rule and the per-matrix selections are
    combined by majority vote. Final clusters are the selected blocks of
    the lowest-entropy matrix restricted to voted genes.
    """
    kept = select_penalties(dataset, base_weave, grid, keep)
    results = []
    for _, matrix in kept:
        try:
            results.append(
                hc_cut(hc_ward(matrix), matrix, small_cluster_size, min_small_clusters)
            )
        except CutNotFoundError:
            continue
    if not results:
        return []
    if len(results) >= 2:
        voted = majority_vote(results)
    else:
        voted = set().union(*_selected_clusters(results[0]))
    clusters = [cluster & voted for cluster in _selected_clusters(results[0])]
    return [cluster for cluster in clusters if cluster]


def weave_sbm_clusters(
    dataset,
    grid: tuple[PenaltyPair, ...],
    keep: int,
    base_weave: WeaveConfig,
    threshold: float,
    q: int,
    rng_seed: int = 0,
) -> list[set[str]]:
    """Module candidates from the weave + block-model pipeline at one
    discretization threshold."""
    kept = select_penalties(dataset, base_weave, grid, keep)
    results = []
    for _, matrix in kept:
        graph = discretize(matrix, threshold)
        fitted = sbm_fit(graph, q, rng_seed=rng_seed)
        results.append(sbm_select(fitted))
    if len(results) >= 2:
        voted = majority_vote(results)
    else:
        voted = set().union(*_selected_clusters(results[0]))
    clusters = [cluster & voted for cluster in _selected_clusters(results[0])]
    return [cluster for cluster in clusters if cluster]


def pearson_hc_clusters(
    dataset,
    shrinkage: float,
    small_cluster_size: int,
    min_small_clusters: int,
    rng_seed: int = 0,
) -> list[set[str]]:
    """Baseline: absolute Pearson correlations of one normalized replicate
    draw, clustered and cut exactly like the weave output."""
    draw = draw_replicates(dataset, child_seed(rng_seed, STREAM_REPLICATE_DRAW, 0))
    model = fit_normalization(draw.matrix, shrinkage)
    z = normalize(draw.matrix, model)
    matrix = pearson_matrix(z, dataset.gene_ids)
    result = hc_cut(hc_ward(matrix), matrix, small_cluster_size, min_small_clusters)
    return _selected_clusters(result)


def run_benchmark(config: BenchmarkConfig) -> list[dict]:
    """Run every (dependency level, seed) cell and aggregate scores.

    Returns long-format rows: one per (pathway, dependency level, method)
    with mean precision/recall over seeds; undefined precisions are
    excluded from means and counted in ``n_undefined``.
    """
    n_groups = len(config.simulation.groups)
    reports: list[tuple[str, float, EvalReport]] = []
    for level in config.dependency_levels:
        for seed in config.seeds:
            spec = replace(config.simulation, dependency_level=level, rng_seed=seed)
            dataset = simulate(spec)
            truth = _truth_groups(spec)
            weave_cfg = replace(config.base_weave, rng_seed=seed)
            clusters = weave_hc_clusters(
                dataset,
                config.grid,
                config.keep,
                weave_cfg,
                config.small_cluster_size,
                n_groups,
            )
            reports.append(
                ("scca.hc", level, score(clusters, truth, method_tag="scca.hc", seeds=(seed,)))
            )
            baseline = pearson_hc_clusters(
                dataset,
                config.base_weave.shrinkage,
                config.small_cluster_size,
                n_groups,
                rng_seed=seed,
            )
            reports.append(
                (
                    "pearson.hc",
                    level,
                    score(baseline, truth, method_tag="pearson.hc", seeds=(seed,)),
                )
            )
            for threshold in config.sbm_thresholds:
                sbm = weave_sbm_clusters(
                    dataset,
                    config.grid,
                    config.keep,
                    weave_cfg,
                    threshold,
                    config.sbm_q,
                    rng_seed=seed,
                )
                reports.append(
                    (
                        f"scca.sbm@{threshold:g}",
                        level,
                        score(sbm, truth, method_tag="scca.sbm", seeds=(seed,)),
                    )
                )
    return aggregate_reports(reports)


def aggregate_reports(
    reports: list[tuple[str, float, EvalReport]]
) -> list[dict]:
    """Collapse per-seed reports into mean rows per (pathway, level, method)."""
    cells: dict[tuple[str, float, str], list] = {}
    for method, level, report in reports:
        for group_score in report.per_group:
            cells.setdefault((group_score.group, level, method), []).append(group_score)
    rows = []
    for (pathway, level, method), scores in sorted(cells.items()):
        precisions = [s.precision for s in scores if not math.isnan(s.precision)]
        rows.append(
            {
                "pathway": pathway,
                "dependency_level": level,
                "method": method,
                "mean_precision": sum(precisions) / len(precisions) if precisions else math.nan,
                "mean_recall": sum(s.recall for s in scores) / len(scores),
                "n_seeds": len(scores),
                "n_undefined_precision": len(scores) - len(precisions),
            }
        )
    return rows


def write_benchmark_csv(path, rows: list[dict]) -> None:
    columns = [
        "pathway",
        "dependency_level",
        "method",
        "mean_precision",
        "mean_recall",
        "n_seeds",
        "n_undefined_precision",
    ]
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            formatted = dict(row)
            for key in ("mean_precision", "mean_recall"):
                formatted[key] = f"{row[key]:.6f}"
            writer.writerow(formatted)


def matrix_for_pearson(dataset, shrinkage: float, rng_seed: int = 0) -> EdgeWeightMatrix:
    """Normalized-draw Pearson matrix, exposed for inspection tools."""
    draw = draw_replicates(dataset, child_seed(rng_seed, STREAM_REPLICATE_DRAW, 0))
    model = fit_normalization(draw.matrix, shrinkage)
    return pearson_matrix(normalize(draw.matrix, model), dataset.gene_ids)
