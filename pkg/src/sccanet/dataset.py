"""Replicated expression datasets: file I/O, gene filtering, replicate draws.

The on-disk format is delimited text (tab or comma, sniffed from the header):

    experiment<sep>replicate<sep><gene id><sep>...
    <label><sep><replicate id><sep><value><sep>...

One row per (experiment, replicate) pair. Every experiment must carry the
same number of replicates. Experiments keep their order of first appearance;
replicates keep file order within an experiment.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DatasetFormatError,
    DegenerateInputError,
    DimensionMismatchError,
    DuplicateGeneIdError,
    EmptyResultError,
    MissingValueError,
)
from .rng import child_rng


@dataclass(frozen=True)
class ExpressionDataset:
    """Expression values indexed (experiment, replicate, gene).

    ``values`` has shape (n_experiments, n_replicates, n_genes) and is
    write-protected after construction.
    """

    values: np.ndarray
    gene_ids: tuple[str, ...]
    experiment_labels: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise DimensionMismatchError(
                f"values must be 3-axis (experiment, replicate, gene), got shape {values.shape}"
            )
        n, r, p = values.shape
        if min(n, r, p) < 1:
            raise DimensionMismatchError(f"empty axis in values shape {values.shape}")
        if len(self.gene_ids) != p:
            raise DimensionMismatchError(
                f"{len(self.gene_ids)} gene ids for {p} gene columns"
            )
        if len(self.experiment_labels) != n:
            raise DimensionMismatchError(
                f"{len(self.experiment_labels)} experiment labels for {n} experiments"
            )
        if len(set(self.gene_ids)) != p:
            raise DuplicateGeneIdError("gene ids are not unique")
        if not np.all(np.isfinite(values)):
            raise DatasetFormatError("values contain NaN or infinity")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "experiment_labels", tuple(self.experiment_labels))

    @property
    def n_experiments(self) -> int:
        return self.values.shape[0]

    @property
    def n_replicates(self) -> int:
        return self.values.shape[1]

    @property
    def n_genes(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class ReplicateDraw:
    """One replicate picked per experiment: an (n_experiments, n_genes)
    matrix plus the replicate index used for each row."""

    matrix: np.ndarray
    source_replicates: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        source = np.asarray(self.source_replicates, dtype=np.int64)
        if matrix.ndim != 2:
            raise DimensionMismatchError("draw matrix must be 2-axis")
        if source.shape != (matrix.shape[0],):
            raise DimensionMismatchError(
                "source_replicates length must equal experiment count"
            )
        matrix.setflags(write=False)
        source.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "source_replicates", source)


def _sniff_delimiter(header: str) -> str:
    return "\t" if "\t" in header else ","


def load_dataset(path: str | Path) -> ExpressionDataset:
    """Parse a delimited expression file into an :class:`ExpressionDataset`.

    Raises :class:`DatasetFormatError` (with a 1-based line number where
    possible) on malformed rows, :class:`DuplicateGeneIdError` on repeated
    gene ids, and :class:`MissingValueError` on empty cells.
    """
    path = Path(path)
    with path.open("r", newline="") as fh:
        first = fh.readline()
        if not first.strip():
            raise DatasetFormatError("empty file", line=1)
        delimiter = _sniff_delimiter(first)
        header = next(csv.reader([first], delimiter=delimiter))
        header = [h.strip() for h in header]
        if len(header) < 3:
            raise DatasetFormatError(
                "header must be 'experiment, replicate, <gene ids...>'", line=1
            )
        if header[0].lower() != "experiment" or header[1].lower() != "replicate":
            raise DatasetFormatError(
                f"header must start with 'experiment, replicate', got {header[:2]}",
                line=1,
            )
        gene_ids = header[2:]
        if any(g == "" for g in gene_ids):
            raise MissingValueError("empty gene id in header", line=1)
        if len(set(gene_ids)) != len(gene_ids):
            raise DuplicateGeneIdError("duplicate gene id in header")

        rows_by_experiment: dict[str, list[np.ndarray]] = {}
        order: list[str] = []
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"expected {len(header)} fields, got {len(row)}", line=lineno
                )
            label = row[0].strip()
            if label == "":
                raise MissingValueError("empty experiment label", line=lineno)
            if row[1].strip() == "":
                raise MissingValueError("empty replicate id", line=lineno)
            cells = row[2:]
            values = np.empty(len(cells), dtype=np.float64)
            for j, cell in enumerate(cells):
                cell = cell.strip()
                if cell == "":
                    raise MissingValueError(
                        f"empty value for gene '{gene_ids[j]}'", line=lineno
                    )
                try:
                    values[j] = float(cell)
                except ValueError:
                    raise DatasetFormatError(
                        f"non-numeric value '{cell}' for gene '{gene_ids[j]}'",
                        line=lineno,
                    ) from None
            if not np.all(np.isfinite(values)):
                raise DatasetFormatError("non-finite value", line=lineno)
            if label not in rows_by_experiment:
                rows_by_experiment[label] = []
                order.append(label)
            rows_by_experiment[label].append(values)

    if not order:
        raise DatasetFormatError("no data rows")
    counts = {label: len(rows) for label, rows in rows_by_experiment.items()}
    r = counts[order[0]]
    bad = [f"{label}({c})" for label, c in counts.items() if c != r]
    if bad:
        raise DatasetFormatError(
            f"unequal replicate counts: expected {r}, got {', '.join(bad)}"
        )
    values = np.stack([np.stack(rows_by_experiment[label]) for label in order])
    return ExpressionDataset(values, tuple(gene_ids), tuple(order))


def write_dataset(d: ExpressionDataset, path: str | Path, delimiter: str = "\t") -> None:
    """Write ``d`` in the delimited format read by :func:`load_dataset`.

    Values are written with enough digits to round-trip float64 exactly.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["experiment", "replicate", *d.gene_ids])
        for i, label in enumerate(d.experiment_labels):
            for k in range(d.n_replicates):
                writer.writerow(
                    [label, k + 1, *(f"{v:.17g}" for v in d.values[i, k])]
                )


def filter_genes(
    d: ExpressionDataset,
    min_variance: float = 0.1,
    max_variance: float = math.inf,
    max_replicate_gap: float = 2.0,
    min_expression: float = 7.0,
) -> ExpressionDataset:
    """Keep genes passing all three per-gene criteria, preserving order.

    A gene survives iff (a) the variance across experiments of its replicate
    means lies strictly inside (min_variance, max_variance), (b) the largest
    within-experiment replicate range is strictly below max_replicate_gap,
    and (c) its smallest value is at least min_expression. Infinity sentinels
    disable individual criteria. Raises :class:`EmptyResultError` when no
    gene survives.
    """
    if not min_variance < max_variance:
        raise DegenerateInputError(
            f"min_variance {min_variance} must be below max_variance {max_variance}"
        )
    values = d.values
    replicate_means = values.mean(axis=1)  # (n, p)
    if d.n_experiments > 1:
        variances = replicate_means.var(axis=0, ddof=1)
    else:
        variances = np.zeros(d.n_genes)
    gaps = (values.max(axis=1) - values.min(axis=1)).max(axis=0)
    minima = values.min(axis=(0, 1))
    keep = (
        (variances > min_variance)
        & (variances < max_variance)
        & (gaps < max_replicate_gap)
        & (minima >= min_expression)
    )
    if not keep.any():
        raise EmptyResultError("no gene passes the filter criteria")
    kept = np.flatnonzero(keep)
    return ExpressionDataset(
        values[:, :, kept],
        tuple(d.gene_ids[j] for j in kept),
        d.experiment_labels,
    )


def subset_genes(d: ExpressionDataset, gene_ids: list[str] | tuple[str, ...]) -> ExpressionDataset:
    """Restrict to the named genes, keeping the dataset's column order."""
    requested = set(gene_ids)
    missing = requested - set(d.gene_ids)
    if missing:
        raise EmptyResultError(f"unknown gene ids: {sorted(missing)[:5]}")
    keep = [j for j, gene in enumerate(d.gene_ids) if gene in requested]
    if not keep:
        raise EmptyResultError("no genes selected")
    return ExpressionDataset(
        d.values[:, :, keep],
        tuple(d.gene_ids[j] for j in keep),
        d.experiment_labels,
    )


def draw_replicates(d: ExpressionDataset, rng_seed: int) -> ReplicateDraw:
    """Pick one replicate per experiment, uniformly and independently."""
    rng = child_rng(rng_seed)
    picks = rng.integers(0, d.n_replicates, size=d.n_experiments)
    matrix = d.values[np.arange(d.n_experiments), picks, :]
    return ReplicateDraw(matrix, picks)
