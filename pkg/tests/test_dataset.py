"""Dataset container, file round trips, filtering, replicate draws."""

from __future__ import annotations

import math

import numpy as np
import pytest

from helpers import gene_names, toy_dataset
from sccanet.dataset import (
    ExpressionDataset,
    draw_replicates,
    filter_genes,
    load_dataset,
    subset_genes,
    write_dataset,
)
from sccanet.errors import (
    DatasetFormatError,
    DegenerateInputError,
    DimensionMismatchError,
    DuplicateGeneIdError,
    EmptyResultError,
    MissingValueError,
)


def test_round_trip_exact_for_both_delimiters(tmp_path):
    rng = np.random.default_rng(0)
    data = toy_dataset(rng, n_experiments=5, n_replicates=3, p=6)
    for name, delimiter in (("d.tsv", "\t"), ("d.csv", ",")):
        path = tmp_path / name
        write_dataset(data, path, delimiter=delimiter)
        back = load_dataset(path)
        np.testing.assert_array_equal(back.values, data.values)
        assert back.gene_ids == data.gene_ids
        assert back.experiment_labels == data.experiment_labels


def write_lines(tmp_path, lines, name="data.csv"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


def test_load_reports_line_numbers(tmp_path):
    header = "experiment,replicate,ga,gb"
    with pytest.raises(DatasetFormatError) as err:
        load_dataset(write_lines(tmp_path, ["experiment,replicate"]))
    assert err.value.line == 1
    with pytest.raises(DatasetFormatError) as err:
        load_dataset(write_lines(tmp_path, ["sample,replicate,ga"]))
    assert err.value.line == 1
    with pytest.raises(DatasetFormatError) as err:
        load_dataset(write_lines(tmp_path, [header, "e1,1,1.0,2.0", "e1,2,3.0"]))
    assert err.value.line == 3
    with pytest.raises(DatasetFormatError) as err:
        load_dataset(write_lines(tmp_path, [header, "e1,1,1.0,oops"]))
    assert err.value.line == 2
    with pytest.raises(DatasetFormatError) as err:
        load_dataset(write_lines(tmp_path, [header, "e1,1,1.0,inf"]))
    assert err.value.line == 2
    with pytest.raises(MissingValueError) as err:
        load_dataset(write_lines(tmp_path, [header, "e1,1,1.0,2.0", "e2,1,,2.0"]))
    assert err.value.line == 3
    with pytest.raises(MissingValueError):
        load_dataset(write_lines(tmp_path, [header, ",1,1.0,2.0"]))
    with pytest.raises(MissingValueError):
        load_dataset(write_lines(tmp_path, [header, "e1,,1.0,2.0"]))
    with pytest.raises(DuplicateGeneIdError):
        load_dataset(write_lines(tmp_path, ["experiment,replicate,ga,ga", "e1,1,1,2"]))
    with pytest.raises(DatasetFormatError, match="empty"):
        load_dataset(write_lines(tmp_path, [""]))
    with pytest.raises(DatasetFormatError, match="no data"):
        load_dataset(write_lines(tmp_path, [header]))


def test_load_skips_blank_rows_and_checks_replicates(tmp_path):
    lines = [
        "experiment,replicate,ga,gb",
        "e1,1,1.0,2.0",
        "",
        "e1,2,1.5,2.5",
        "e2,1,3.0,4.0",
        "e2,2,3.5,4.5",
    ]
    data = load_dataset(write_lines(tmp_path, lines))
    assert data.n_experiments == 2 and data.n_replicates == 2 and data.n_genes == 2
    assert data.values[1, 0, 1] == 4.0
    with pytest.raises(DatasetFormatError, match="unequal"):
        load_dataset(write_lines(tmp_path, lines[:-1]))


def test_dataset_container_validation():
    values = np.zeros((2, 2, 3))
    with pytest.raises(DimensionMismatchError):
        ExpressionDataset(np.zeros((2, 3)), gene_names(3), ("e1", "e2"))
    with pytest.raises(DimensionMismatchError):
        ExpressionDataset(np.zeros((2, 0, 3)), gene_names(3), ("e1", "e2"))
    with pytest.raises(DimensionMismatchError):
        ExpressionDataset(values, gene_names(2), ("e1", "e2"))
    with pytest.raises(DimensionMismatchError):
        ExpressionDataset(values, gene_names(3), ("e1",))
    with pytest.raises(DuplicateGeneIdError):
        ExpressionDataset(values, ("a", "a", "b"), ("e1", "e2"))
    bad = values.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(DatasetFormatError):
        ExpressionDataset(bad, gene_names(3), ("e1", "e2"))
    data = ExpressionDataset(values, gene_names(3), ("e1", "e2"))
    with pytest.raises(ValueError):
        data.values[0, 0, 0] = 1.0


def filter_fixture() -> ExpressionDataset:
    # Four experiments, two replicates, five genes with hand-set failure
    # modes: g2 low variance, g3 wide replicate gap, g4 low minimum.
    base = np.array(
        [
            [10.0, 10.0, 10.0, 10.0],  # g1 passes
            [10.0, 10.1, 10.0, 10.1],  # g2 variance ~0.003
            [10.0, 10.0, 10.0, 10.0],  # g3 gap 3.0 in experiment 1
            [10.0, 10.0, 10.0, 6.0],  # g4 minimum below 7
            [ 8.0, 11.0, 14.0, 17.0],  # g5 passes
        ]
    ).T  # (n=4, p=5)
    values = np.stack([base, base], axis=1)  # identical replicates
    values[1, 0, 0] += 1.0  # g1 still passes: gap 1.0 < 2.0
    values[0, 1, 2] += 3.0  # g3 fails: gap 3.0 >= 2.0
    values[:, :, 0] += np.array([0.0, 1.0, 2.0, 3.0])[:, None]  # g1 variance
    return ExpressionDataset(values, gene_names(5), ("e1", "e2", "e3", "e4"))


def test_filter_genes_criteria_and_idempotence():
    data = filter_fixture()
    kept = filter_genes(data)
    assert kept.gene_ids == ("g0001", "g0005")
    again = filter_genes(kept)
    np.testing.assert_array_equal(again.values, kept.values)
    assert again.gene_ids == kept.gene_ids
    # Sentinels disable criteria one at a time.
    no_gap = filter_genes(data, max_replicate_gap=math.inf)
    assert "g0003" in no_gap.gene_ids
    no_floor = filter_genes(data, min_expression=-math.inf)
    assert "g0004" in no_floor.gene_ids
    low_var = filter_genes(data, min_variance=1e-6)
    assert "g0002" in low_var.gene_ids
    capped = filter_genes(data, max_variance=2.0)
    assert "g0005" not in capped.gene_ids


def test_filter_genes_boundaries_are_strict():
    # Variance exactly at min_variance fails; gap exactly at the cap fails;
    # minimum exactly at min_expression passes.
    base = np.array([[7.0, 9.0], [7.0, 11.0], [7.0, 13.0]])  # (n=3, p=2)
    values = np.stack([base, base], axis=1)
    data = ExpressionDataset(values, ("flat", "steep"), ("e1", "e2", "e3"))
    assert filter_genes(data, min_variance=3.9).gene_ids == ("steep",)
    with pytest.raises(EmptyResultError):
        filter_genes(data, min_variance=4.0)
    values = values.copy()
    values[0, 1, 1] += 2.0
    gapped = ExpressionDataset(values, ("flat", "steep"), ("e1", "e2", "e3"))
    with pytest.raises(EmptyResultError):
        filter_genes(gapped, min_variance=0.01, max_replicate_gap=2.0)
    assert filter_genes(gapped, min_variance=0.01, max_replicate_gap=2.1).gene_ids == (
        "steep",
    )
    assert filter_genes(data, min_variance=0.01, min_expression=7.0).gene_ids == (
        "steep",
    )
    with pytest.raises(DegenerateInputError):
        filter_genes(data, min_variance=5.0, max_variance=1.0)


def test_subset_genes_keeps_dataset_order():
    rng = np.random.default_rng(1)
    data = toy_dataset(rng, p=6)
    subset = subset_genes(data, ["g0005", "g0002"])
    assert subset.gene_ids == ("g0002", "g0005")
    np.testing.assert_array_equal(subset.values[:, :, 1], data.values[:, :, 4])
    with pytest.raises(EmptyResultError):
        subset_genes(data, ["g0002", "nope"])
    with pytest.raises(EmptyResultError):
        subset_genes(data, [])


def test_draw_replicates_deterministic_and_uniform():
    rng = np.random.default_rng(2)
    data = toy_dataset(rng, n_experiments=6, n_replicates=3, p=4)
    first = draw_replicates(data, rng_seed=9)
    second = draw_replicates(data, rng_seed=9)
    np.testing.assert_array_equal(first.source_replicates, second.source_replicates)
    np.testing.assert_array_equal(first.matrix, second.matrix)
    assert first.matrix.shape == (6, 4)
    for i, pick in enumerate(first.source_replicates):
        np.testing.assert_array_equal(first.matrix[i], data.values[i, pick])
    counts = np.zeros(3)
    trials = 3000
    for seed in range(trials):
        picks = draw_replicates(data, rng_seed=seed).source_replicates
        counts += np.bincount(picks, minlength=3)
    rates = counts / (trials * 6)
    np.testing.assert_allclose(rates, 1.0 / 3.0, atol=0.02)
