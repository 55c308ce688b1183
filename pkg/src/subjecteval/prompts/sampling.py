"""Greedy farthest-point subsampling over unit-norm embeddings.

Distances are cosine distances (1 - dot). The optional proximity filter
drops candidates whose nearest reference embedding is farther than a
threshold *before* sampling, so the greedy maximin semantics stay intact.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError, UsageError

CENTROID_START = "centroid"
SEEDED_START = "seeded"


def _normalized(matrix, what: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DataError(f"{what} must be a 2-D array, got shape {matrix.shape}")
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0):
        raise DataError(f"{what} contains a zero vector")
    return matrix / norms[:, None]


def farthest_point_sample(candidate_embeddings, k: int, seed: int = 0,
                          proximity_filter=None,
                          start: str = CENTROID_START) -> list[int]:
    """Pick k candidate indices by greedy maximin cosine distance.

    The first point is the candidate nearest the centroid of the surviving
    set (``start="centroid"``, default) or a seed-indexed survivor
    (``start="seeded"``). Each following step adds the candidate whose
    minimum distance to the selected set is largest; ties break toward the
    lowest index. Deterministic for fixed inputs and seed.

    ``proximity_filter`` is an optional ``(reference_embeddings,
    max_distance)`` pair: candidates whose nearest reference is farther
    than ``max_distance`` are dropped before sampling.
    """
    if start not in (CENTROID_START, SEEDED_START):
        raise UsageError(f"unknown start mode {start!r}")
    points = _normalized(candidate_embeddings, "candidate embeddings")
    n = points.shape[0]

    survivors = np.arange(n)
    if proximity_filter is not None:
        reference, max_distance = proximity_filter
        reference = _normalized(reference, "reference embeddings")
        nearest = 1.0 - (points @ reference.T).max(axis=1)
        survivors = np.flatnonzero(nearest <= max_distance)
    if k > survivors.size:
        raise DataError(
            f"k={k} exceeds the {survivors.size} candidates surviving the filter"
        )
    if k < 0:
        raise UsageError(f"k must be non-negative, got {k}")
    if k == 0:
        return []

    pool = points[survivors]
    if start == CENTROID_START:
        centroid = pool.mean(axis=0)
        first = int(np.argmax(pool @ centroid))
    else:
        rng = np.random.default_rng(seed)
        first = int(rng.integers(survivors.size))

    selected = [first]
    min_dist = 1.0 - pool @ pool[first]
    min_dist[first] = -np.inf
    while len(selected) < k:
        # np.argmax returns the first (lowest-index) maximum: the tie rule
        chosen = int(np.argmax(min_dist))
        selected.append(chosen)
        min_dist = np.minimum(min_dist, 1.0 - pool @ pool[chosen])
        min_dist[chosen] = -np.inf
    return [int(survivors[i]) for i in selected]
