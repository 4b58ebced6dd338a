"""Replicate-matrix normalization with an estimated experiment covariance.

A drawn replicate matrix z (experiments x genes) is modeled as an additive
mean surface plus correlated experiment effects. Fitting estimates

    M_ij = row_mean_i + col_mean_j - grand_mean
    Sigma_E = (1 - w) * C + w * I

where C is the sample correlation between the rows of the gene-standardized
residuals and w is a shrinkage weight. Normalization whitens the rows,

    z_star = Sigma_E^{-1/2} (z - M),

then centers every gene column and scales it to unit Euclidean norm so the
output is directly usable by the canonical-correlation solver.

The additive mean model makes the residuals doubly centered, so C is exactly
singular at w = 0; whitening therefore requires w > 0 (or an otherwise
positive definite estimate) and raises NotPositiveDefiniteError when any
eigenvalue falls below the 1e-10 floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
)

EIGENVALUE_FLOOR = 1e-10


@dataclass(frozen=True)
class NormalizationModel:
    """Fitted mean surface and shrunken experiment covariance."""

    mean_matrix: np.ndarray  # (n, p)
    experiment_covariance: np.ndarray  # (n, n), unit diagonal
    shrinkage: float

    def __post_init__(self):
        mean = np.asarray(self.mean_matrix, dtype=np.float64)
        cov = np.asarray(self.experiment_covariance, dtype=np.float64)
        if mean.ndim != 2:
            raise DimensionMismatchError("mean_matrix must be 2-axis")
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise DimensionMismatchError(
                f"experiment_covariance shape {cov.shape} does not match {n} experiments"
            )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean_matrix", mean)
        object.__setattr__(self, "experiment_covariance", cov)

    @property
    def n_experiments(self) -> int:
        return self.mean_matrix.shape[0]

    @property
    def n_genes(self) -> int:
        return self.mean_matrix.shape[1]


def _validate_matrix(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionMismatchError("expected a 2-axis (experiments x genes) matrix")
    if z.shape[0] < 2 or z.shape[1] < 2:
        raise DimensionMismatchError(
            f"need at least 2 experiments and 2 genes, got shape {z.shape}"
        )
    if not np.all(np.isfinite(z)):
        raise DegenerateInputError("matrix contains NaN or infinity")
    return z


def fit_normalization(z: np.ndarray, shrinkage: float = 0.5) -> NormalizationModel:
    """Fit the mean surface and shrunken experiment correlation on ``z``."""
    z = _validate_matrix(z)
    if not 0.0 <= shrinkage <= 1.0:
        raise DegenerateInputError(f"shrinkage must lie in [0, 1], got {shrinkage}")
    row_means = z.mean(axis=1, keepdims=True)
    col_means = z.mean(axis=0, keepdims=True)
    grand = z.mean()
    mean_matrix = row_means + col_means - grand
    residuals = z - mean_matrix

    row_spread = residuals.max(axis=1) - residuals.min(axis=1)
    if np.any(row_spread == 0.0):
        bad = int(np.argmin(row_spread))
        raise DegenerateInputError(f"residual row {bad} is constant")
    col_sd = residuals.std(axis=0, ddof=1)
    if np.any(col_sd == 0.0):
        bad = int(np.argmin(col_sd))
        raise DegenerateInputError(f"gene column {bad} has constant residuals")

    standardized = residuals / col_sd
    corr = np.corrcoef(standardized)
    if not np.all(np.isfinite(corr)):
        raise DegenerateInputError("experiment correlation is undefined")
    sigma = (1.0 - shrinkage) * corr + shrinkage * np.eye(z.shape[0])
    return NormalizationModel(mean_matrix, sigma, float(shrinkage))


def inverse_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root via eigendecomposition.

    Raises :class:`NotPositiveDefiniteError` when any eigenvalue is below
    the 1e-10 floor.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    if eigenvalues.min() < EIGENVALUE_FLOOR:
        raise NotPositiveDefiniteError(
            f"matrix is numerically singular (min eigenvalue {eigenvalues.min():.3e})"
        )
    return (eigenvectors / np.sqrt(eigenvalues)) @ eigenvectors.T


def whiten(z: np.ndarray, m: NormalizationModel) -> np.ndarray:
    """Row-whitened residuals, before column standardization."""
    z = _validate_matrix(z)
    if z.shape != (m.n_experiments, m.n_genes):
        raise DimensionMismatchError(
            f"matrix shape {z.shape} does not match model "
            f"({m.n_experiments}, {m.n_genes})"
        )
    return inverse_sqrt(m.experiment_covariance) @ (z - m.mean_matrix)


def standardize_columns(z: np.ndarray) -> np.ndarray:
    """Center each column and scale it to unit Euclidean norm."""
    z = np.asarray(z, dtype=np.float64)
    centered = z - z.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centered, axis=0)
    if np.any(norms == 0.0):
        bad = int(np.argmin(norms))
        raise DegenerateInputError(f"gene column {bad} is constant")
    return centered / norms


def normalize(z: np.ndarray, m: NormalizationModel) -> np.ndarray:
    """Whiten ``z`` with the fitted model and standardize gene columns."""
    return standardize_columns(whiten(z, m))
