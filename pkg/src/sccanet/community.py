"""Gene module extraction from an edge-weight matrix.

Two detection routes over the same :class:`EdgeWeightMatrix`:

* stochastic block model: threshold the weights into a binary graph,
  initialize labels by perturbed spectral clustering, refine them with an
  unconditional pseudo-likelihood EM, then pick the block with the highest
  internal edge density;
* hierarchical clustering: Ward linkage on the dissimilarity 1 - weight,
  cut at the smallest cluster count that produces enough small clusters.

Both return a :class:`CommunityResult`; results from several matrices can
be combined by :func:`majority_vote`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import KMeans

from .errors import (
    CutNotFoundError,
    DimensionMismatchError,
    ValidationError,
)
from .netweave import EdgeWeightMatrix
from .rng import STREAM_KMEANS, child_seed

_THETA_FLOOR = 1e-12


@dataclass(frozen=True)
class BinaryGraph:
    """Undirected unweighted graph as a symmetric 0/1 matrix, zero diagonal."""

    adjacency: np.ndarray
    gene_ids: tuple[str, ...]

    def __post_init__(self):
        adjacency = np.asarray(self.adjacency)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise DimensionMismatchError(
                f"adjacency must be square, got {adjacency.shape}"
            )
        if len(self.gene_ids) != adjacency.shape[0]:
            raise DimensionMismatchError("gene id count does not match adjacency")
        values = np.unique(adjacency)
        if not np.all(np.isin(values, (0, 1))):
            raise ValidationError("adjacency entries must be 0 or 1")
        if np.any(adjacency != adjacency.T):
            raise ValidationError("adjacency must be symmetric")
        if np.any(np.diagonal(adjacency) != 0):
            raise ValidationError("adjacency diagonal must be zero")
        adjacency = adjacency.astype(np.int8)
        adjacency.setflags(write=False)
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))

    @property
    def n_genes(self) -> int:
        return self.adjacency.shape[0]


@dataclass(frozen=True)
class CommunityResult:
    """Block assignment plus descriptive block statistics.

    ``labels`` are 1-based block ids; ``gamma`` holds block proportions,
    ``pi`` pairwise block edge densities (or mean weights for the
    hierarchical route). ``em_traces`` records the pseudo-likelihood
    objective of each EM pass for diagnostics.
    """

    labels: np.ndarray
    gamma: np.ndarray
    pi: np.ndarray
    selected_blocks: tuple[int, ...]
    method_tag: str
    gene_ids: tuple[str, ...]
    q_effective: int
    dropped_empty_blocks: bool = False
    em_traces: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        gamma = np.asarray(self.gamma, dtype=np.float64)
        pi = np.asarray(self.pi, dtype=np.float64)
        q = self.q_effective
        if labels.ndim != 1 or len(self.gene_ids) != labels.shape[0]:
            raise DimensionMismatchError("labels must align with gene ids")
        if labels.min() < 1 or labels.max() > q:
            raise ValidationError(f"labels must lie in 1..{q}")
        if gamma.shape != (q,) or pi.shape != (q, q):
            raise DimensionMismatchError("gamma/pi shapes must match q_effective")
        if not set(self.selected_blocks) <= set(range(1, q + 1)):
            raise ValidationError("selected_blocks outside 1..q_effective")
        for arr in (labels, gamma, pi):
            arr.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "selected_blocks", tuple(self.selected_blocks))
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))

    def block_members(self, block: int) -> tuple[str, ...]:
        """Gene ids carrying the given 1-based block label."""
        return tuple(
            gene for gene, label in zip(self.gene_ids, self.labels) if label == block
        )


@dataclass(frozen=True)
class Dendrogram:
    """Agglomeration history. Row k of ``merges`` is (id_a, id_b, cost,
    size): leaves are 0..p-1, the cluster created by row k has id p + k."""

    merges: np.ndarray
    gene_ids: tuple[str, ...]

    def __post_init__(self):
        merges = np.asarray(self.merges, dtype=np.float64)
        p = len(self.gene_ids)
        if merges.shape != (p - 1, 4):
            raise DimensionMismatchError(
                f"expected {(p - 1, 4)} merge table, got {merges.shape}"
            )
        merges.setflags(write=False)
        object.__setattr__(self, "merges", merges)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))

    @property
    def n_leaves(self) -> int:
        return len(self.gene_ids)


def discretize(a: EdgeWeightMatrix, threshold: float) -> BinaryGraph:
    """Edge iff weight >= threshold; threshold must lie in (0, 1]."""
    if not 0.0 < threshold <= 1.0:
        raise ValidationError(f"threshold must lie in (0, 1], got {threshold}")
    adjacency = (a.weights >= threshold).astype(np.int8)
    np.fill_diagonal(adjacency, 0)
    return BinaryGraph(adjacency, a.gene_ids)


def spectral_init(g: BinaryGraph, q: int, rng_seed: int = 0) -> np.ndarray:
    """Initial 1-based labels from perturbed adjacency spectral clustering.

    The perturbation adds (mean degree / p) to every off-diagonal entry,
    which keeps sparse graphs from fragmenting. Rows of the leading
    eigenvector matrix are length-normalized before a 10-restart k-means.
    """
    p = g.n_genes
    if not 1 <= q <= p:
        raise ValidationError(f"q must lie in 1..{p}, got {q}")
    if q == 1:
        return np.ones(p, dtype=np.int64)
    adjacency = g.adjacency.astype(np.float64)
    tau = adjacency.sum() / p / p  # mean degree over p
    perturbed = adjacency + tau * (1.0 - np.eye(p))
    eigenvalues, eigenvectors = np.linalg.eigh(perturbed)
    order = np.argsort(-np.abs(eigenvalues), kind="stable")
    basis = eigenvectors[:, order[:q]]
    norms = np.linalg.norm(basis, axis=1, keepdims=True)
    nonzero = norms[:, 0] > 0.0
    basis[nonzero] /= norms[nonzero]
    km = KMeans(
        n_clusters=q,
        n_init=10,
        random_state=child_seed(rng_seed, STREAM_KMEANS) % (2**32),
    )
    return km.fit_predict(basis).astype(np.int64) + 1


def _block_counts(adjacency: np.ndarray, labels0: np.ndarray, q: int) -> np.ndarray:
    """counts[i, k] = number of neighbors of node i inside block k."""
    indicator = np.zeros((labels0.shape[0], q))
    indicator[np.arange(labels0.shape[0]), labels0] = 1.0
    return adjacency @ indicator


def _em_on_counts(
    counts: np.ndarray, labels0: np.ndarray, q: int, tol: float = 1e-10, max_iter: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """EM for a q-component product-Poisson mixture on fixed counts.

    Returns (posteriors, objective trace). The objective is the mixture
    log-likelihood up to the b! constant and is nondecreasing over passes.
    """
    p = counts.shape[0]
    gamma = np.bincount(labels0, minlength=q).astype(np.float64) / p
    gamma = np.maximum(gamma, 1e-12)
    gamma /= gamma.sum()
    theta = np.empty((q, q))
    for label in range(q):
        members = labels0 == label
        theta[label] = counts[members].mean(axis=0) if members.any() else counts.mean(axis=0)
    trace = []
    posteriors = None
    previous = -np.inf
    for _ in range(max_iter):
        log_theta = np.log(np.maximum(theta, _THETA_FLOOR))
        log_like = counts @ log_theta.T - theta.sum(axis=1)  # (p, q)
        joint = log_like + np.log(gamma)
        norm = logsumexp(joint, axis=1)
        objective = float(norm.sum())
        trace.append(objective)
        posteriors = np.exp(joint - norm[:, None])
        mass = posteriors.sum(axis=0)
        gamma = np.maximum(mass / p, 1e-12)
        gamma /= gamma.sum()
        theta = (posteriors.T @ counts) / np.maximum(mass, 1e-300)[:, None]
        if objective - previous < tol and np.isfinite(previous):
            break
        previous = objective
    return posteriors, np.asarray(trace)


def _block_density(adjacency: np.ndarray, labels0: np.ndarray, q: int) -> np.ndarray:
    """Empirical edge frequency between (and within) blocks."""
    pi = np.zeros((q, q))
    sizes = np.bincount(labels0, minlength=q)
    indicator = np.zeros((labels0.shape[0], q))
    indicator[np.arange(labels0.shape[0]), labels0] = 1.0
    sums = indicator.T @ adjacency @ indicator  # double-counts within blocks
    for k in range(q):
        for m in range(q):
            if k == m:
                pairs = sizes[k] * (sizes[k] - 1)
            else:
                pairs = sizes[k] * sizes[m]
            pi[k, m] = sums[k, m] / pairs if pairs > 0 else 0.0
    return pi


def sbm_fit(
    g: BinaryGraph,
    q: int,
    init_labels: np.ndarray | None = None,
    max_iter: int = 50,
    rng_seed: int = 0,
) -> CommunityResult:
    """Unconditional pseudo-likelihood block model fit.

    Each sweep compresses adjacency rows into per-block neighbor counts
    under the current labels, runs EM on the resulting Poisson-product
    mixture, and relabels nodes by maximum posterior; sweeps stop when the
    labels are stable. gamma and pi are estimated descriptively from the
    final hard labels. Blocks left empty are dropped (q_effective < q) with
    a warning flag on the result.
    """
    p = g.n_genes
    if not 1 <= q <= p:
        raise ValidationError(f"q must lie in 1..{p}, got {q}")
    if init_labels is None:
        labels = spectral_init(g, q, rng_seed)
    else:
        labels = np.asarray(init_labels, dtype=np.int64)
        if labels.shape != (p,) or labels.min() < 1 or labels.max() > q:
            raise ValidationError("init_labels must be 1-based block ids of length p")
    if max_iter < 1:
        raise ValidationError("max_iter must be >= 1")
    adjacency = g.adjacency.astype(np.float64)
    labels0 = labels - 1
    traces: list[np.ndarray] = []
    for _ in range(max_iter):
        counts = _block_counts(adjacency, labels0, q)
        posteriors, trace = _em_on_counts(counts, labels0, q)
        traces.append(trace)
        new_labels0 = np.argmax(posteriors, axis=1)
        if np.array_equal(new_labels0, labels0):
            break
        labels0 = new_labels0

    used = np.unique(labels0)
    dropped = used.shape[0] < q
    if dropped:
        warnings.warn(
            f"{q - used.shape[0]} block(s) ended empty; relabeling to "
            f"{used.shape[0]} blocks",
            stacklevel=2,
        )
        remap = {old: new for new, old in enumerate(used)}
        labels0 = np.asarray([remap[value] for value in labels0], dtype=np.int64)
    q_eff = used.shape[0]
    sizes = np.bincount(labels0, minlength=q_eff)
    gamma = sizes / p
    pi = _block_density(adjacency, labels0, q_eff)
    return CommunityResult(
        labels=labels0 + 1,
        gamma=gamma,
        pi=pi,
        selected_blocks=(),
        method_tag="sbm",
        gene_ids=g.gene_ids,
        q_effective=q_eff,
        dropped_empty_blocks=dropped,
        em_traces=tuple(traces),
    )


def sbm_select(result: CommunityResult) -> CommunityResult:
    """Mark the block with the highest internal edge density as selected.

    Ties go to the smaller block, then the lower block id.
    """
    sizes = np.bincount(result.labels - 1, minlength=result.q_effective)
    candidates = sorted(
        range(result.q_effective),
        key=lambda k: (-result.pi[k, k], sizes[k], k),
    )
    return replace(result, selected_blocks=(candidates[0] + 1,))


def hc_ward(a: EdgeWeightMatrix) -> Dendrogram:
    """Ward agglomeration on the dissimilarity 1 - weight.

    Pairwise squared distances between genes are 1 - A[i, j], so the merge
    cost for two singletons is (1 - A[i, j]) / 2; later costs follow the
    Ward update. Exact cost ties are broken by the smallest (id_a, id_b)
    pair, which makes the merge sequence deterministic.
    """
    p = a.n_genes
    if p < 2:
        raise ValidationError("need at least 2 genes to cluster")
    # Slot-compacted working matrix of pairwise Ward costs.
    costs = (1.0 - a.weights) / 2.0
    np.fill_diagonal(costs, np.inf)
    ids = np.arange(p, dtype=np.int64)
    sizes = np.ones(p, dtype=np.int64)
    active = p
    merges = np.empty((p - 1, 4))
    for step in range(p - 1):
        view = costs[:active, :active]
        minimum = view.min()
        rows, cols = np.nonzero(view == minimum)
        upper = rows < cols
        rows, cols = rows[upper], cols[upper]
        # Candidates are encoded as id_lo * base + id_hi so the argmin picks
        # the lexicographically smallest (id_a, id_b) pair among ties.
        id_lo = np.minimum(ids[rows], ids[cols])
        id_hi = np.maximum(ids[rows], ids[cols])
        pick = int(np.argmin(id_lo * np.int64(2 * p) + id_hi))
        si, sj = int(rows[pick]), int(cols[pick])
        id_a, id_b = int(id_lo[pick]), int(id_hi[pick])
        ni = sizes[si]
        nj = sizes[sj]
        nk = sizes[:active]
        denom = ni + nj + nk
        updated = (
            (ni + nk) * costs[si, :active]
            + (nj + nk) * costs[sj, :active]
            - nk * minimum
        ) / denom
        costs[si, :active] = updated
        costs[:active, si] = updated
        costs[si, si] = np.inf
        merges[step] = (id_a, id_b, minimum, ni + nj)
        ids[si] = p + step
        sizes[si] = ni + nj
        last = active - 1
        if sj != last:
            costs[sj, :active] = costs[last, :active]
            costs[:active, sj] = costs[:active, last]
            costs[sj, sj] = np.inf
            ids[sj] = ids[last]
            sizes[sj] = sizes[last]
        active = last
    return Dendrogram(merges, a.gene_ids)


def _labels_at_cut(d: Dendrogram, n_clusters: int) -> np.ndarray:
    """1-based cluster labels after applying the first p - Q merges,
    numbered by first gene occurrence."""
    p = d.n_leaves
    parent = np.arange(2 * p - 1, dtype=np.int64)

    def find(node: int) -> int:
        root = node
        while parent[root] != root:
            root = parent[root]
        while parent[node] != root:
            parent[node], node = root, parent[node]
        return root

    for step in range(p - n_clusters):
        id_a, id_b = int(d.merges[step, 0]), int(d.merges[step, 1])
        merged = p + step
        parent[find(id_a)] = merged
        parent[find(id_b)] = merged
    roots = [find(i) for i in range(p)]
    labels = np.empty(p, dtype=np.int64)
    seen: dict[int, int] = {}
    for i, root in enumerate(roots):
        if root not in seen:
            seen[root] = len(seen) + 1
        labels[i] = seen[root]
    return labels


def _block_mean_weights(weights: np.ndarray, labels0: np.ndarray, q: int) -> np.ndarray:
    pi = np.zeros((q, q))
    sizes = np.bincount(labels0, minlength=q)
    indicator = np.zeros((labels0.shape[0], q))
    indicator[np.arange(labels0.shape[0]), labels0] = 1.0
    sums = indicator.T @ weights @ indicator
    for k in range(q):
        for m in range(q):
            if k == m:
                pairs = sizes[k] * (sizes[k] - 1)
            else:
                pairs = sizes[k] * sizes[m]
            pi[k, m] = sums[k, m] / pairs if pairs > 0 else 0.0
    return pi


def hc_cut(
    d: Dendrogram,
    a: EdgeWeightMatrix,
    small_cluster_size: int = 25,
    min_small_clusters: int = 1,
) -> CommunityResult:
    """Cut at the smallest cluster count that yields enough small clusters.

    Q is increased from 2 until at least ``min_small_clusters`` clusters of
    size below ``small_cluster_size`` appear; those small clusters become
    the selected blocks. Raises :class:`CutNotFoundError` when no cut
    satisfies the rule.
    """
    if small_cluster_size < 2:
        raise ValidationError("small_cluster_size must be >= 2")
    if min_small_clusters < 1:
        raise ValidationError("min_small_clusters must be >= 1")
    if tuple(a.gene_ids) != tuple(d.gene_ids):
        raise ValidationError("dendrogram and weights disagree on gene ids")
    p = d.n_leaves
    # Track how many clusters are small after each merge; merge k leaves
    # p - k clusters, so cutting at Q corresponds to k = p - Q.
    small_after = np.empty(p, dtype=np.int64)
    small_after[0] = p if small_cluster_size > 1 else 0
    cluster_size = {i: 1 for i in range(p)}
    count = small_after[0]
    for step in range(p - 1):
        id_a, id_b = int(d.merges[step, 0]), int(d.merges[step, 1])
        size_a = cluster_size.pop(id_a)
        size_b = cluster_size.pop(id_b)
        merged = size_a + size_b
        count -= (size_a < small_cluster_size) + (size_b < small_cluster_size)
        count += merged < small_cluster_size
        cluster_size[p + step] = merged
        small_after[step + 1] = count
    chosen_q = None
    for q in range(2, p + 1):
        if small_after[p - q] >= min_small_clusters:
            chosen_q = q
            break
    if chosen_q is None:
        raise CutNotFoundError(
            f"no cut with >= {min_small_clusters} clusters smaller than "
            f"{small_cluster_size}"
        )
    labels = _labels_at_cut(d, chosen_q)
    labels0 = labels - 1
    sizes = np.bincount(labels0, minlength=chosen_q)
    gamma = sizes / p
    pi = _block_mean_weights(a.weights, labels0, chosen_q)
    selected = tuple(
        int(block + 1) for block in range(chosen_q) if sizes[block] < small_cluster_size
    )
    return CommunityResult(
        labels=labels,
        gamma=gamma,
        pi=pi,
        selected_blocks=selected,
        method_tag="hc",
        gene_ids=d.gene_ids,
        q_effective=chosen_q,
    )


def majority_vote(results: list[CommunityResult]) -> set[str]:
    """Genes appearing in a selected block in more than half of the results.

    All results must cover the same gene universe (order included).
    """
    if len(results) < 2:
        raise ValidationError("majority vote needs at least 2 results")
    universe = results[0].gene_ids
    for result in results[1:]:
        if result.gene_ids != universe:
            raise ValidationError("results cover different gene universes")
    votes = np.zeros(len(universe), dtype=np.int64)
    for result in results:
        selected = set(result.selected_blocks)
        votes += np.isin(result.labels, list(selected))
    threshold = len(results) / 2.0
    return {gene for gene, count in zip(universe, votes) if count > threshold}
