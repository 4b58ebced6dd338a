"""Deterministic on-disk artifacts.

Matrices are stored in a small binary container (magic line, one JSON
header line, raw little-endian float64 payload) so that repeated runs with
the same configuration produce byte-identical files; archive formats embed
timestamps and would break that. Cluster assignments and score reports are
stored as canonical JSON (sorted keys, fixed float formatting).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .community import CommunityResult
from .errors import DatasetFormatError, DimensionMismatchError, ValidationError
from .evalkit import EvalReport, GroupScore
from .netweave import EdgeWeightMatrix

_MAGIC = b"SCCANET/MATRIX/1\n"


def write_matrix(
    path,
    values: np.ndarray,
    gene_ids: tuple[str, ...],
    row_labels: tuple[str, ...] | None = None,
    kind: str = "matrix",
) -> None:
    """Write a 2-axis float64 matrix with column (gene) identifiers."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-axis matrix, got {values.shape}")
    if len(gene_ids) != values.shape[1]:
        raise DimensionMismatchError("gene id count does not match columns")
    if row_labels is not None and len(row_labels) != values.shape[0]:
        raise DimensionMismatchError("row label count does not match rows")
    header = {
        "kind": kind,
        "shape": list(values.shape),
        "gene_ids": list(gene_ids),
        "row_labels": list(row_labels) if row_labels is not None else None,
    }
    payload = values.astype("<f8", copy=False).tobytes(order="C")
    with open(path, "wb") as handle:
        handle.write(_MAGIC)
        handle.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        handle.write(b"\n")
        handle.write(payload)


def read_matrix(path) -> tuple[np.ndarray, tuple[str, ...], tuple[str, ...] | None, str]:
    """Read a matrix container; returns (values, gene_ids, row_labels, kind)."""
    with open(path, "rb") as handle:
        magic = handle.read(len(_MAGIC))
        if magic != _MAGIC:
            raise DatasetFormatError(f"{path} is not a matrix container")
        header_line = handle.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as error:
            raise DatasetFormatError(f"bad container header in {path}: {error}") from error
        payload = handle.read()
    shape = tuple(header["shape"])
    expected = shape[0] * shape[1] * 8
    if len(payload) != expected:
        raise DatasetFormatError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    gene_ids = tuple(header["gene_ids"])
    row_labels = tuple(header["row_labels"]) if header["row_labels"] is not None else None
    return values, gene_ids, row_labels, header.get("kind", "matrix")


def write_edge_weights(path, matrix: EdgeWeightMatrix) -> None:
    write_matrix(path, matrix.weights, matrix.gene_ids, kind="edge-weights")


def read_edge_weights(path) -> EdgeWeightMatrix:
    values, gene_ids, _, kind = read_matrix(path)
    if kind != "edge-weights":
        raise DatasetFormatError(f"{path} holds {kind!r}, not edge weights")
    return EdgeWeightMatrix(weights=values, gene_ids=gene_ids)


def write_edges_csv(path, matrix: EdgeWeightMatrix, threshold: float = 0.0) -> int:
    """Write edges with weight above ``threshold`` as gene_i,gene_j,weight
    rows (upper triangle only). Returns the number of edges written."""
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold must lie in [0, 1], got {threshold}")
    count = 0
    with open(path, "w", newline="") as handle:
        handle.write("gene_i,gene_j,weight\n")
        weights = matrix.weights
        ids = matrix.gene_ids
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                if weights[i, j] > threshold:
                    handle.write(f"{ids[i]},{ids[j]},{weights[i, j]:.17g}\n")
                    count += 1
    return count


def _canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_communities(path, result: CommunityResult) -> None:
    data = {
        "method": result.method_tag,
        "q_effective": result.q_effective,
        "dropped_empty_blocks": result.dropped_empty_blocks,
        "selected_blocks": list(result.selected_blocks),
        "gamma": [f"{value:.17g}" for value in result.gamma],
        "pi": [[f"{value:.17g}" for value in row] for row in result.pi],
        "labels": {gene: int(label) for gene, label in zip(result.gene_ids, result.labels)},
    }
    Path(path).write_text(_canonical_json(data))


def read_communities(path) -> CommunityResult:
    data = json.loads(Path(path).read_text())
    gene_ids = tuple(data["labels"].keys())
    labels = np.asarray(list(data["labels"].values()), dtype=np.int64)
    return CommunityResult(
        labels=labels,
        gamma=np.asarray([float(v) for v in data["gamma"]]),
        pi=np.asarray([[float(v) for v in row] for row in data["pi"]]),
        selected_blocks=tuple(data["selected_blocks"]),
        method_tag=data["method"],
        gene_ids=gene_ids,
        q_effective=data["q_effective"],
        dropped_empty_blocks=data["dropped_empty_blocks"],
    )


def write_report(path, report: EvalReport) -> None:
    data = {
        "method": report.method_tag,
        "seeds": list(report.seeds),
        "config_digest": report.config_digest,
        "mean_precision": _float_or_nan(report.mean_precision),
        "mean_recall": _float_or_nan(report.mean_recall),
        "undefined_precision_count": report.undefined_precision_count,
        "per_group": [
            {
                "group": s.group,
                "matched_cluster": s.matched_cluster,
                "n_true": s.n_true,
                "n_predicted": s.n_predicted,
                "n_overlap": s.n_overlap,
                "precision": _float_or_nan(s.precision),
                "recall": s.recall,
            }
            for s in report.per_group
        ],
    }
    Path(path).write_text(_canonical_json(data))


def _float_or_nan(value: float):
    return None if math.isnan(value) else value


def read_report(path) -> EvalReport:
    data = json.loads(Path(path).read_text())
    per_group = tuple(
        GroupScore(
            group=item["group"],
            matched_cluster=item["matched_cluster"],
            n_true=item["n_true"],
            n_predicted=item["n_predicted"],
            n_overlap=item["n_overlap"],
            precision=math.nan if item["precision"] is None else item["precision"],
            recall=item["recall"],
        )
        for item in data["per_group"]
    )
    return EvalReport(
        per_group=per_group,
        method_tag=data["method"],
        seeds=tuple(data["seeds"]),
        config_digest=data["config_digest"],
    )
