"""Deterministic seed derivation.

Every source of randomness in the package draws from a generator derived from
a single root seed plus a structured key, so runs are reproducible and
independent work units (rounds, partitions) can be computed in any order.
Streams are identified by small integer constants; the counter is the work
unit index (for partitions, ``b * T + t``).
"""

from __future__ import annotations

import numpy as np

# Stream identifiers. Keeping them in one place guarantees two call sites
# never collide on the same derived sequence.
STREAM_REPLICATE_DRAW = 0
STREAM_SUBSAMPLE = 1
STREAM_PARTITION = 2
STREAM_KMEANS = 3
STREAM_SIM_EXPERIMENT = 4
STREAM_SIM_GENE = 5
STREAM_SIM_NOISE = 6
STREAM_SIM_MATRIX = 7


def child_sequence(root_seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for stream/counter ``key`` under ``root_seed``."""
    return np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in key))


def child_rng(root_seed: int, *key: int) -> np.random.Generator:
    """Generator seeded from :func:`child_sequence`."""
    return np.random.default_rng(child_sequence(root_seed, *key))


def child_seed(root_seed: int, *key: int) -> int:
    """A plain integer seed derived from the same stream, for APIs that
    accept only an int."""
    return int(child_sequence(root_seed, *key).generate_state(1, np.uint64)[0])
