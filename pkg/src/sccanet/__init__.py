"""Gene network inference from replicated expression data.

The pipeline: normalize experiment dependencies out of the data, run
sparse canonical correlation analysis across many random gene partitions
and replicate subsamples, aggregate the absolute weights into an
edge-weight matrix, and extract gene modules by block-model or
hierarchical community detection.
"""

from ._backend import backend_name
from .community import (
    BinaryGraph,
    CommunityResult,
    Dendrogram,
    discretize,
    hc_cut,
    hc_ward,
    majority_vote,
    sbm_fit,
    sbm_select,
    spectral_init,
)
from .dataset import (
    ExpressionDataset,
    ReplicateDraw,
    draw_replicates,
    filter_genes,
    load_dataset,
    subset_genes,
    write_dataset,
)
from .errors import (
    ConfigError,
    CutNotFoundError,
    DatasetFormatError,
    DegenerateInputError,
    DimensionMismatchError,
    DuplicateGeneIdError,
    EmptyResultError,
    MissingValueError,
    NotPositiveDefiniteError,
    SccaNetError,
    StageError,
    ValidationError,
)
from .evalkit import EvalReport, GroupScore, pearson_matrix, score
from .knorm import (
    NormalizationModel,
    fit_normalization,
    inverse_sqrt,
    normalize,
    standardize_columns,
    whiten,
)
from .netweave import (
    EdgeWeightMatrix,
    WeaveConfig,
    entropy,
    random_partition,
    select_penalties,
    weave,
    weave_once,
)
from .scca import PenaltyPair, SccaSolution, scca_solve, soft_threshold
from .simgen import (
    SimulationSpec,
    make_experiment_correlation,
    make_gene_correlation,
    minimal_example_covariance,
    minimal_example_dataset,
    partial_correlation,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryGraph",
    "CommunityResult",
    "ConfigError",
    "CutNotFoundError",
    "DatasetFormatError",
    "DegenerateInputError",
    "Dendrogram",
    "DimensionMismatchError",
    "DuplicateGeneIdError",
    "EdgeWeightMatrix",
    "EmptyResultError",
    "EvalReport",
    "ExpressionDataset",
    "GroupScore",
    "MissingValueError",
    "NormalizationModel",
    "NotPositiveDefiniteError",
    "PenaltyPair",
    "ReplicateDraw",
    "SccaNetError",
    "SccaSolution",
    "SimulationSpec",
    "StageError",
    "ValidationError",
    "WeaveConfig",
    "backend_name",
    "discretize",
    "draw_replicates",
    "entropy",
    "filter_genes",
    "fit_normalization",
    "hc_cut",
    "hc_ward",
    "inverse_sqrt",
    "load_dataset",
    "majority_vote",
    "make_experiment_correlation",
    "make_gene_correlation",
    "minimal_example_covariance",
    "minimal_example_dataset",
    "normalize",
    "partial_correlation",
    "pearson_matrix",
    "random_partition",
    "sbm_fit",
    "sbm_select",
    "scca_solve",
    "score",
    "select_penalties",
    "simulate",
    "soft_threshold",
    "spectral_init",
    "standardize_columns",
    "subset_genes",
    "weave",
    "weave_once",
    "whiten",
    "write_dataset",
]
