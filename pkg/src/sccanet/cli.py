"""Command-line interface and pipeline orchestration.

Subcommands cover each stage (simulate, ingest, normalize, weave, tune,
detect, score), a YAML-driven ``pipeline`` runner that persists every
artifact with a manifest, a multi-stage ``staged-search`` that removes
found modules between penalty grids, the ``benchmark`` table generator,
and a ``scca`` debug solver. Exit codes: 0 success, 2 invalid input,
3 stage failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import io as artifacts
from ._backend import backend_name
from .benchmark import BenchmarkConfig, run_benchmark, write_benchmark_csv
from .community import (
    CommunityResult,
    discretize,
    hc_cut,
    hc_ward,
    majority_vote,
    sbm_fit,
    sbm_select,
)
from .dataset import (
    ExpressionDataset,
    draw_replicates,
    filter_genes,
    load_dataset,
    subset_genes,
    write_dataset,
)
from .errors import ConfigError, SccaNetError, StageError, ValidationError
from .evalkit import EvalReport, score
from .knorm import fit_normalization, normalize
from .netweave import EdgeWeightMatrix, WeaveConfig, entropy, select_penalties, weave
from .rng import STREAM_REPLICATE_DRAW, child_seed
from .scca import PenaltyPair, scca_solve
from .simgen import SimulationSpec, group_gene_indices, minimal_example_dataset, simulate

THREADS_ENV = "SCCA_NET_THREADS"


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValidationError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value


def _parse_axis(text: str) -> tuple[float, ...]:
    """Penalty axis: either 'start:stop:step' (inclusive) or 'a,b,c'."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid axis must be start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(part) for part in parts)
        except ValueError:
            raise ValidationError(f"non-numeric grid axis {text!r}") from None
        if step <= 0 or stop < start:
            raise ValidationError(f"grid axis {text!r} must ascend with positive step")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(count))
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise ValidationError(f"non-numeric grid axis {text!r}") from None
    if not values:
        raise ValidationError("empty grid axis")
    return values


def _build_grid(axis1: str, axis2: str | None) -> tuple[PenaltyPair, ...]:
    first = _parse_axis(axis1)
    second = _parse_axis(axis2) if axis2 else first
    return tuple(PenaltyPair(l1, l2) for l1 in first for l2 in second)


def _parse_groups(text: str) -> tuple[int, ...]:
    if not text.strip():
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ValidationError(f"groups must be comma-separated integers, got {text!r}") from None


def _load_matrix_or_dataset(path: str) -> ExpressionDataset | EdgeWeightMatrix:
    """Datasets are delimited text; matrices use the binary container."""
    with open(path, "rb") as handle:
        head = handle.read(len(artifacts._MAGIC))
    if head == artifacts._MAGIC:
        values, gene_ids, row_labels, _ = artifacts.read_matrix(path)
        labels = row_labels if row_labels is not None else tuple(
            f"e{i + 1:02d}" for i in range(values.shape[0])
        )
        return ExpressionDataset(values[:, None, :], gene_ids, labels)
    return load_dataset(path)


def _weave_input(path: str) -> tuple[ExpressionDataset, bool]:
    """Return (dataset, already_normalized). A stored matrix is wrapped as
    a single-replicate dataset and skips per-round normalization."""
    loaded = _load_matrix_or_dataset(path)
    if isinstance(loaded, ExpressionDataset) and loaded.n_replicates == 1:
        with open(path, "rb") as handle:
            if handle.read(len(artifacts._MAGIC)) == artifacts._MAGIC:
                return loaded, True
    return loaded, False


def _write_clusters(path, clusters: list[set[str]]) -> None:
    data = {"clusters": [sorted(cluster) for cluster in clusters]}
    Path(path).write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")


def _read_clusters(path) -> list[set[str]]:
    data = json.loads(Path(path).read_text())
    if "clusters" in data:
        return [set(cluster) for cluster in data["clusters"]]
    if "labels" in data and "selected_blocks" in data:
        result = artifacts.read_communities(path)
        return [set(result.block_members(block)) for block in result.selected_blocks]
    raise ValidationError(f"{path} holds neither a cluster list nor a community result")


def _read_truth(path) -> dict[str, set[str]]:
    data = json.loads(Path(path).read_text())
    if "groups" in data:
        data = data["groups"]
    if not isinstance(data, dict):
        raise ValidationError(f"{path} must map group names to gene lists")
    return {str(name): set(map(str, genes)) for name, genes in data.items()}


def _truth_from_spec(spec: SimulationSpec, gene_ids: tuple[str, ...]) -> dict[str, list[str]]:
    return {
        f"pathway{k + 1}": sorted(gene_ids[i] for i in block)
        for k, block in enumerate(group_gene_indices(spec))
    }


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_simulate(args) -> int:
    if args.minimal:
        dataset = minimal_example_dataset(
            n_experiments=args.experiments,
            eps=args.eps,
            delta=args.delta,
            noise_sd=args.noise_sd,
            rng_seed=args.seed,
        )
        write_dataset(dataset, args.out)
        return 0
    spec = SimulationSpec(
        n_genes=args.genes,
        n_experiments=args.experiments,
        n_replicates=args.replicates,
        groups=_parse_groups(args.groups),
        dependency_level=args.dependency,
        replicate_noise_sd=args.replicate_noise_sd,
        rng_seed=args.seed,
    )
    dataset = simulate(spec)
    write_dataset(dataset, args.out)
    if args.truth_out:
        Path(args.truth_out).write_text(
            json.dumps({"groups": _truth_from_spec(spec, dataset.gene_ids)}, sort_keys=True, indent=2)
            + "\n"
        )
    return 0


def _cmd_ingest(args) -> int:
    dataset = load_dataset(args.input)
    if not args.no_filter:
        dataset = filter_genes(
            dataset,
            min_variance=args.min_variance,
            max_variance=args.max_variance,
            max_replicate_gap=args.max_replicate_gap,
            min_expression=args.min_expression,
        )
    write_dataset(dataset, args.out)
    print(f"{dataset.n_experiments} experiments x {dataset.n_replicates} replicates x {dataset.n_genes} genes")
    return 0


def _cmd_normalize(args) -> int:
    dataset = load_dataset(args.input)
    draw = draw_replicates(dataset, child_seed(args.seed, STREAM_REPLICATE_DRAW, 0))
    model = fit_normalization(draw.matrix, args.shrinkage)
    z = normalize(draw.matrix, model)
    artifacts.write_matrix(
        args.out, z, dataset.gene_ids, row_labels=dataset.experiment_labels, kind="normalized"
    )
    return 0


def _weave_config_from_args(args, penalties: PenaltyPair | None = None) -> WeaveConfig:
    if penalties is None:
        penalties = PenaltyPair(args.lambda1, args.lambda2)
    return WeaveConfig(
        penalties=penalties,
        subsample_fraction=args.subsample,
        n_partitions=args.partitions,
        n_rounds=args.rounds,
        rng_seed=args.seed,
        shrinkage=args.shrinkage,
        tol=args.tol,
        max_iter=args.max_iter,
        workers=args.threads,
    )


def _cmd_weave(args) -> int:
    dataset, normalized = _weave_input(args.input)
    cfg = _weave_config_from_args(args)
    if normalized or args.skip_normalization:
        cfg = dataclasses.replace(cfg, skip_normalization=True)
    matrix = weave(dataset, cfg)
    artifacts.write_edge_weights(args.out, matrix)
    if args.edges:
        count = artifacts.write_edges_csv(args.edges, matrix, args.edge_threshold)
        print(f"{count} edges above {args.edge_threshold}")
    print(f"entropy {entropy(matrix):.6f}")
    return 0


def _cmd_tune(args) -> int:
    dataset, normalized = _weave_input(args.input)
    # Placeholder penalties; select_penalties swaps in each grid point.
    cfg = _weave_config_from_args(args, penalties=PenaltyPair(0.0, 0.0))
    if normalized or args.skip_normalization:
        cfg = dataclasses.replace(cfg, skip_normalization=True)
    grid = _build_grid(args.grid, args.grid2)
    kept = select_penalties(dataset, cfg, list(grid), args.keep)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for rank, (pair, matrix) in enumerate(kept):
        name = f"kept_{rank:02d}_l1_{pair.lambda1:g}_l2_{pair.lambda2:g}.ewm"
        artifacts.write_edge_weights(out_dir / name, matrix)
        rows.append((pair.lambda1, pair.lambda2, entropy(matrix), name))
    with open(out_dir / "entropy.csv", "w") as handle:
        handle.write("lambda1,lambda2,entropy,file\n")
        for lambda1, lambda2, value, name in rows:
            handle.write(f"{lambda1:g},{lambda2:g},{value:.17g},{name}\n")
    print(f"kept {len(kept)} of {len(grid)} grid points in {out_dir}")
    return 0


def _detect_one(matrix: EdgeWeightMatrix, args) -> CommunityResult:
    if args.method == "hc":
        dendrogram = hc_ward(matrix)
        return hc_cut(dendrogram, matrix, args.small_size, args.min_small)
    graph = discretize(matrix, args.threshold)
    fitted = sbm_fit(graph, args.q, max_iter=args.max_iter, rng_seed=args.seed)
    return sbm_select(fitted)


def _cmd_detect(args) -> int:
    source = Path(args.input)
    if source.is_dir():
        files = sorted(source.glob("kept_*.ewm"))
        if not files:
            raise ValidationError(f"no kept_*.ewm matrices in {source}")
        results = [_detect_one(artifacts.read_edge_weights(f), args) for f in files]
        base = results[0]
        if len(results) >= 2:
            voted = majority_vote(results)
        else:
            voted = {g for b in base.selected_blocks for g in base.block_members(b)}
        clusters = [
            set(base.block_members(block)) & voted for block in base.selected_blocks
        ]
        clusters = [cluster for cluster in clusters if cluster]
        artifacts.write_communities(Path(args.out).with_suffix(".base.json"), base)
    else:
        matrix = artifacts.read_edge_weights(source)
        result = _detect_one(matrix, args)
        clusters = [set(result.block_members(block)) for block in result.selected_blocks]
        artifacts.write_communities(Path(args.out).with_suffix(".base.json"), result)
    _write_clusters(args.out, clusters)
    print(f"{len(clusters)} cluster(s): " + "; ".join(str(len(c)) for c in clusters))
    return 0


def _cmd_score(args) -> int:
    predicted = _read_clusters(args.clusters)
    truth = _read_truth(args.truth)
    report = score(predicted, truth, method_tag=args.method_tag)
    artifacts.write_report(args.out, report)
    precision = report.mean_precision
    text = "undefined" if math.isnan(precision) else f"{precision:.4f}"
    print(f"mean precision {text}, mean recall {report.mean_recall:.4f}")
    return 0


def _cmd_benchmark(args) -> int:
    simulation = SimulationSpec(
        n_genes=args.genes,
        n_experiments=args.experiments,
        n_replicates=args.replicates,
        groups=_parse_groups(args.groups),
        rng_seed=0,
    )
    base = WeaveConfig(
        penalties=PenaltyPair(9.0, 9.0),
        subsample_fraction=args.subsample,
        n_partitions=args.partitions,
        n_rounds=args.rounds,
        workers=args.threads,
    )
    config = BenchmarkConfig(
        simulation=simulation,
        dependency_levels=tuple(float(x) for x in args.levels.split(",")),
        seeds=tuple(range(args.seeds)),
        grid=_build_grid(args.grid, args.grid2),
        keep=args.keep,
        base_weave=base,
        small_cluster_size=args.small_size,
        sbm_thresholds=tuple(float(x) for x in args.sbm_levels.split(",")) if args.sbm_levels else (),
    )
    rows = run_benchmark(config)
    write_benchmark_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_scca(args) -> int:
    def load(path):
        with open(path) as handle:
            first = handle.readline()
        delimiter = "," if "," in first else None
        return np.loadtxt(path, delimiter=delimiter, ndmin=2)

    x = load(args.x)
    y = load(args.y)
    solution = scca_solve(
        x,
        y,
        PenaltyPair(args.lambda1, args.lambda2),
        tol=args.tol,
        max_iter=args.max_iter,
    )
    print(
        json.dumps(
            {
                "objective": solution.objective,
                "iterations": solution.iterations,
                "converged": solution.converged,
                "a": solution.a.tolist(),
                "b": solution.b.tolist(),
                "objective_trace": solution.objective_trace.tolist(),
            },
            indent=2,
        )
    )
    return 0


# ---------------------------------------------------------------------------
# pipeline


_STAGE_SUCCESSORS = {
    None: {"simulate", "ingest"},
    "simulate": {"normalize", "weave", "tune"},
    "ingest": {"normalize", "weave", "tune"},
    "normalize": {"weave", "tune"},
    "weave": {"detect"},
    "tune": {"detect"},
    "detect": {"score"},
    "score": set(),
}


@dataclass(frozen=True)
class PipelineConfig:
    """Validated stage chain plus run-wide settings."""

    stages: tuple[tuple[str, dict], ...]
    seed: int = 0
    output_dir: str = "run"
    threads: int = 1

    def __post_init__(self):
        if not self.stages:
            raise ConfigError("pipeline needs at least one stage")
        previous = None
        for name, params in self.stages:
            allowed = _STAGE_SUCCESSORS.get(previous, set())
            if name not in allowed:
                raise ConfigError(
                    f"stage {name!r} cannot follow {previous!r}; allowed: {sorted(allowed)}"
                )
            if not isinstance(params, dict):
                raise ConfigError(f"stage {name!r} parameters must be a mapping")
            previous = name
        object.__setattr__(self, "stages", tuple((n, dict(p)) for n, p in self.stages))

    def digest(self) -> str:
        payload = json.dumps(
            {"seed": self.seed, "stages": [[n, p] for n, p in self.stages]},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_pipeline_config(path) -> PipelineConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as error:
        raise ConfigError(f"cannot parse {path}: {error}") from error
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must hold a mapping")
    stages_raw = raw.get("stages")
    if not isinstance(stages_raw, list):
        raise ConfigError("config needs a 'stages' list")
    stages = []
    for item in stages_raw:
        if not isinstance(item, dict) or "stage" not in item:
            raise ConfigError("each stage needs a 'stage' key")
        params = {k: v for k, v in item.items() if k != "stage"}
        stages.append((str(item["stage"]), params))
    return PipelineConfig(
        stages=tuple(stages),
        seed=int(raw.get("seed", 0)),
        output_dir=str(raw.get("output_dir", "run")),
        threads=int(raw.get("threads", 1)),
    )


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _pipeline_weave_config(params: dict, seed: int, threads: int, skip: bool) -> WeaveConfig:
    return WeaveConfig(
        penalties=PenaltyPair(
            float(params.get("lambda1", 9.0)), float(params.get("lambda2", 9.0))
        ),
        subsample_fraction=float(params.get("subsample", 0.7)),
        n_partitions=int(params.get("partitions", 100)),
        n_rounds=int(params.get("rounds", 50)),
        rng_seed=int(params.get("seed", seed)),
        skip_normalization=skip,
        shrinkage=float(params.get("shrinkage", 0.5)),
        tol=float(params.get("tol", 1e-6)),
        max_iter=int(params.get("max_iter", 200)),
        workers=threads,
    )


def run_pipeline(config: PipelineConfig, base_dir: str | Path = ".") -> dict:
    """Execute the stage chain, persisting artifacts and a manifest.

    Reruns with an identical config produce byte-identical artifacts; the
    manifest records the config digest, seeds, package version, backend,
    and a hash per artifact. Stage failures are wrapped in
    :class:`StageError` with the stage name.
    """
    from . import __version__

    run_dir = Path(base_dir) / config.output_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    state: dict = {"dataset": None, "normalized": None, "weights": None, "kept": None}
    manifest_stages = []

    def record(stage: str, params: dict, outputs: list[Path]):
        manifest_stages.append(
            {
                "stage": stage,
                "params": params,
                "outputs": [
                    {"path": str(path.relative_to(run_dir)), "sha256": _sha256(path)}
                    for path in outputs
                ],
            }
        )

    for name, params in config.stages:
        try:
            outputs = _run_stage(name, params, config, run_dir, state)
        except ValidationError:
            raise
        except SccaNetError as error:
            raise StageError(f"stage {name!r} failed: {error}") from error
        record(name, params, outputs)

    manifest = {
        "config_digest": config.digest(),
        "seed": config.seed,
        "threads": config.threads,
        "package_version": __version__,
        "backend": backend_name(),
        "stages": manifest_stages,
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def _run_stage(
    name: str, params: dict, config: PipelineConfig, run_dir: Path, state: dict
) -> list[Path]:
    seed = config.seed
    if name == "simulate":
        if params.get("minimal", False):
            dataset = minimal_example_dataset(
                n_experiments=int(params.get("experiments", 500)),
                eps=float(params.get("eps", 0.05)),
                delta=float(params.get("delta", 0.05)),
                noise_sd=float(params.get("noise_sd", 0.05)),
                rng_seed=int(params.get("seed", seed)),
            )
            spec = None
        else:
            spec = SimulationSpec(
                n_genes=int(params.get("genes", 500)),
                n_experiments=int(params.get("experiments", 30)),
                n_replicates=int(params.get("replicates", 5)),
                groups=tuple(params.get("groups", [15])),
                dependency_level=float(params.get("dependency", 0.0)),
                replicate_noise_sd=float(params.get("replicate_noise_sd", 0.01)),
                rng_seed=int(params.get("seed", seed)),
            )
            dataset = simulate(spec)
        path = run_dir / "dataset.tsv"
        write_dataset(dataset, path)
        state["dataset"] = dataset
        outputs = [path]
        if spec is not None and spec.groups:
            truth_path = run_dir / "truth.json"
            truth_path.write_text(
                json.dumps(
                    {"groups": _truth_from_spec(spec, dataset.gene_ids)},
                    sort_keys=True,
                    indent=2,
                )
                + "\n"
            )
            state["truth"] = truth_path
            outputs.append(truth_path)
        return outputs

    if name == "ingest":
        source = params.get("path")
        if not source:
            raise ConfigError("ingest stage needs a 'path'")
        dataset = load_dataset(source)
        if not params.get("no_filter", False):
            dataset = filter_genes(
                dataset,
                min_variance=float(params.get("min_variance", 0.1)),
                max_variance=float(params.get("max_variance", math.inf)),
                max_replicate_gap=float(params.get("max_replicate_gap", 2.0)),
                min_expression=float(params.get("min_expression", 7.0)),
            )
        path = run_dir / "dataset.tsv"
        write_dataset(dataset, path)
        state["dataset"] = dataset
        return [path]

    if name == "normalize":
        dataset = state["dataset"]
        draw = draw_replicates(dataset, child_seed(int(params.get("seed", seed)), STREAM_REPLICATE_DRAW, 0))
        model = fit_normalization(draw.matrix, float(params.get("shrinkage", 0.5)))
        z = normalize(draw.matrix, model)
        path = run_dir / "normalized.ewm"
        artifacts.write_matrix(
            path, z, dataset.gene_ids, row_labels=dataset.experiment_labels, kind="normalized"
        )
        state["normalized"] = ExpressionDataset(
            z[:, None, :], dataset.gene_ids, dataset.experiment_labels
        )
        return [path]

    if name in ("weave", "tune"):
        source = state["normalized"] or state["dataset"]
        skip = state["normalized"] is not None
        cfg = _pipeline_weave_config(params, seed, config.threads, skip)
        if name == "weave":
            matrix = weave(source, cfg)
            path = run_dir / "weights.ewm"
            artifacts.write_edge_weights(path, matrix)
            state["weights"] = matrix
            return [path]
        grid_axis = str(params.get("grid", "9:27:3"))
        grid = _build_grid(grid_axis, params.get("grid2"))
        kept = select_penalties(source, cfg, list(grid), int(params.get("keep", 10)))
        state["kept"] = kept
        outputs = []
        for rank, (pair, matrix) in enumerate(kept):
            path = run_dir / f"kept_{rank:02d}_l1_{pair.lambda1:g}_l2_{pair.lambda2:g}.ewm"
            artifacts.write_edge_weights(path, matrix)
            outputs.append(path)
        entropy_path = run_dir / "entropy.csv"
        with open(entropy_path, "w") as handle:
            handle.write("lambda1,lambda2,entropy\n")
            for pair, matrix in kept:
                handle.write(f"{pair.lambda1:g},{pair.lambda2:g},{entropy(matrix):.17g}\n")
        outputs.append(entropy_path)
        return outputs

    if name == "detect":
        method = str(params.get("method", "hc"))
        small = int(params.get("small_size", 25))
        min_small = int(params.get("min_small", 1))
        threshold = float(params.get("threshold", 0.5))
        q = int(params.get("q", 3))

        def detect_one(matrix: EdgeWeightMatrix) -> CommunityResult:
            if method == "hc":
                return hc_cut(hc_ward(matrix), matrix, small, min_small)
            if method == "sbm":
                fitted = sbm_fit(
                    discretize(matrix, threshold),
                    q,
                    max_iter=int(params.get("max_iter", 50)),
                    rng_seed=int(params.get("seed", seed)),
                )
                return sbm_select(fitted)
            raise ConfigError(f"unknown detect method {method!r}")

        if state["kept"] is not None:
            results = [detect_one(matrix) for _, matrix in state["kept"]]
            base = results[0]
            if len(results) >= 2:
                voted = majority_vote(results)
            else:
                voted = {g for b in base.selected_blocks for g in base.block_members(b)}
            clusters = [set(base.block_members(b)) & voted for b in base.selected_blocks]
            clusters = [c for c in clusters if c]
        else:
            base = detect_one(state["weights"])
            clusters = [set(base.block_members(b)) for b in base.selected_blocks]
        communities_path = run_dir / "communities.json"
        artifacts.write_communities(communities_path, base)
        clusters_path = run_dir / "clusters.json"
        _write_clusters(clusters_path, clusters)
        state["clusters"] = clusters
        return [communities_path, clusters_path]

    if name == "score":
        truth_source = params.get("truth") or state.get("truth")
        if truth_source is None:
            raise ConfigError("score stage needs a 'truth' path (or a simulate stage with groups)")
        truth = _read_truth(truth_source)
        report = score(
            state["clusters"],
            truth,
            method_tag=str(params.get("method_tag", "")),
            config_digest=config.digest(),
        )
        path = run_dir / "report.json"
        artifacts.write_report(path, report)
        state["report"] = report
        return [path]

    raise ConfigError(f"unknown stage {name!r}")


def _cmd_pipeline(args) -> int:
    config = load_pipeline_config(args.config)
    if args.out_dir:
        config = dataclasses.replace(config, output_dir=args.out_dir)
    if args.threads:
        config = dataclasses.replace(config, threads=args.threads)
    manifest = run_pipeline(config, base_dir=args.base_dir)
    print(f"run complete: {Path(args.base_dir) / config.output_dir} ({manifest['config_digest'][:12]})")
    return 0


# ---------------------------------------------------------------------------
# staged search


def run_staged_search(
    dataset: ExpressionDataset,
    lambda_grids: list[tuple[PenaltyPair, ...]],
    base_weave: WeaveConfig,
    keep: int = 10,
    small_cluster_size: int = 25,
    min_small_clusters: int = 1,
) -> list[dict]:
    """Repeated tune-and-detect over successively lower penalty grids.

    Each stage selects penalties on the current gene set, cuts the kept
    matrices, majority-votes the selections, records the resulting groups,
    and removes their genes before the next stage. The search stops early
    when fewer than 4 / subsample_fraction genes remain.
    """
    if not lambda_grids:
        raise ValidationError("need at least one penalty grid")
    current = dataset
    stages = []
    minimum = 4.0 / base_weave.subsample_fraction
    for index, grid in enumerate(lambda_grids):
        if current.n_genes < minimum:
            stages.append(
                {
                    "stage": index,
                    "stopped": True,
                    "reason": f"{current.n_genes} genes left, need >= {minimum:.0f}",
                    "groups": [],
                }
            )
            break
        kept = select_penalties(current, base_weave, list(grid), keep)
        results = []
        for _, matrix in kept:
            try:
                results.append(
                    hc_cut(hc_ward(matrix), matrix, small_cluster_size, min_small_clusters)
                )
            except SccaNetError:
                continue
        if not results:
            stages.append({"stage": index, "stopped": False, "groups": []})
            continue
        base = results[0]
        if len(results) >= 2:
            voted = majority_vote(results)
        else:
            voted = {g for b in base.selected_blocks for g in base.block_members(b)}
        clusters = [set(base.block_members(b)) & voted for b in base.selected_blocks]
        clusters = [sorted(c) for c in clusters if c]
        stages.append({"stage": index, "stopped": False, "groups": clusters})
        found = {gene for cluster in clusters for gene in cluster}
        remaining = [g for g in current.gene_ids if g not in found]
        if not remaining:
            break
        current = subset_genes(current, remaining)
    return stages


def _cmd_staged_search(args) -> int:
    dataset = load_dataset(args.input)
    grids = [_build_grid(axis, None) for axis in args.grids.split(";")]
    base = WeaveConfig(
        penalties=PenaltyPair(9.0, 9.0),
        subsample_fraction=args.subsample,
        n_partitions=args.partitions,
        n_rounds=args.rounds,
        rng_seed=args.seed,
        shrinkage=args.shrinkage,
        workers=args.threads,
    )
    stages = run_staged_search(
        dataset,
        grids,
        base,
        keep=args.keep,
        small_cluster_size=args.small_size,
        min_small_clusters=args.min_small,
    )
    Path(args.out).write_text(json.dumps({"stages": stages}, sort_keys=True, indent=2) + "\n")
    total = sum(len(stage["groups"]) for stage in stages)
    print(f"{total} group(s) over {len(stages)} stage(s)")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_weave_options(parser, tune: bool = False):
    parser.add_argument("--subsample", type=float, default=0.7, help="gene subsample fraction per round")
    parser.add_argument("--partitions", type=int, default=100, help="random partitions per round")
    parser.add_argument("--rounds", type=int, default=50, help="subsample rounds")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--shrinkage", type=float, default=0.5, help="experiment-correlation shrinkage")
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--max-iter", type=int, default=200)
    parser.add_argument("--skip-normalization", action="store_true")
    parser.add_argument("--threads", type=int, default=None)
    if not tune:
        parser.add_argument("--lambda1", type=float, required=True, help="penalty on the subset-1 weights")
        parser.add_argument("--lambda2", type=float, required=True, help="penalty on the subset-2 weights")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scca-net",
        description="Gene network inference by subsampled sparse canonical correlations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic replicated dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--genes", type=int, default=500)
    p.add_argument("--experiments", type=int, default=30)
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--groups", default="15", help="comma-separated planted group sizes")
    p.add_argument("--dependency", type=float, default=0.0, help="fraction of correlated experiments")
    p.add_argument("--replicate-noise-sd", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth-out", default=None, help="write planted groups as JSON")
    p.add_argument("--minimal", action="store_true", help="seven-gene fixture instead")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--noise-sd", type=float, default=0.05)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ingest", help="validate, filter, and canonicalize a dataset file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-variance", type=float, default=0.1)
    p.add_argument("--max-variance", type=float, default=math.inf)
    p.add_argument("--max-replicate-gap", type=float, default=2.0)
    p.add_argument("--min-expression", type=float, default=7.0)
    p.add_argument("--no-filter", action="store_true")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("normalize", help="draw replicates and whiten experiment correlations")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--shrinkage", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("weave", help="aggregate SCCA weights into an edge-weight matrix")
    p.add_argument("--in", dest="input", required=True, help="dataset .tsv or normalized .ewm")
    p.add_argument("--out", required=True)
    _add_weave_options(p)
    p.add_argument("--edges", default=None, help="also write an edge list CSV")
    p.add_argument("--edge-threshold", type=float, default=0.0)
    p.set_defaults(func=_cmd_weave)

    p = sub.add_parser("tune", help="weave over a penalty grid and keep the lowest-entropy matrices")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--grid", required=True, help="axis as start:stop:step or comma list")
    p.add_argument("--grid2", default=None, help="second axis (defaults to --grid)")
    p.add_argument("--keep", type=int, default=10)
    _add_weave_options(p, tune=True)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("detect", help="extract gene modules from edge weights")
    p.add_argument("--in", dest="input", required=True, help=".ewm file or tune output directory")
    p.add_argument("--out", required=True, help="clusters JSON")
    p.add_argument("--method", choices=("hc", "sbm"), default="hc")
    p.add_argument("--small-size", type=int, default=25, help="clusters below this size are modules")
    p.add_argument("--min-small", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.5, help="edge threshold for sbm")
    p.add_argument("--q", type=int, default=3, help="block count for sbm")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("score", help="precision/recall of clusters against truth groups")
    p.add_argument("--clusters", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method-tag", default="")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("benchmark", help="planted-group recovery table over dependency levels")
    p.add_argument("--out", required=True)
    p.add_argument("--genes", type=int, default=500)
    p.add_argument("--experiments", type=int, default=30)
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--groups", default="15,15")
    p.add_argument("--levels", default="0,0.33,0.67")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--grid", default="9:27:3")
    p.add_argument("--grid2", default=None)
    p.add_argument("--keep", type=int, default=10)
    p.add_argument("--subsample", type=float, default=0.7)
    p.add_argument("--partitions", type=int, default=50)
    p.add_argument("--rounds", type=int, default=25)
    p.add_argument("--small-size", type=int, default=25)
    p.add_argument("--sbm-levels", default="", help="optional discretization sweep, e.g. 0.3,0.4")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("pipeline", help="run a YAML-configured stage chain")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None, help="override the config's output_dir")
    p.add_argument("--base-dir", default=".")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("staged-search", help="tune and detect over successive grids, removing found genes")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grids", required=True, help="semicolon-separated axes, e.g. '90,100,110;60,70,80'")
    p.add_argument("--keep", type=int, default=10)
    p.add_argument("--subsample", type=float, default=0.7)
    p.add_argument("--partitions", type=int, default=100)
    p.add_argument("--rounds", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shrinkage", type=float, default=0.5)
    p.add_argument("--small-size", type=int, default=25)
    p.add_argument("--min-small", type=int, default=1)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_staged_search)

    p = sub.add_parser("scca", help="solve one penalized canonical-correlation instance (debug)")
    p.add_argument("--x", required=True, help="n x q1 matrix file")
    p.add_argument("--y", required=True, help="n x q2 matrix file")
    p.add_argument("--lambda1", type=float, default=0.0)
    p.add_argument("--lambda2", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=200)
    p.set_defaults(func=_cmd_scca)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        try:
            args.threads = _default_threads()
        except ValidationError as error:
            print(f"error: {error}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except ValidationError as error:
        print(f"error: {error}", file=sys.stderr)
        return 2
    except SccaNetError as error:
        print(f"stage failure: {error}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
