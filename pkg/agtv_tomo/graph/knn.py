"""Exact and approximate K-nearest-neighbour search over patch vectors

Both searches rank neighbours by (distance, index), so ties always resolve
to the smaller index, and both compute distances with the same per-pair
kernel. With an unbounded probe budget the approximate search therefore
returns exactly what the quadratic scan returns.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from agtv_tomo.graph.patches import PatchSet

logger = logging.getLogger(__name__)

DEFAULT_QUALITY = 32
DEFAULT_TREES = 4
DEFAULT_LEAF_SIZE = 32
_TOP_DIMS = 5  # split dimension drawn among the highest-variance coordinates


@dataclass(frozen=True)
class NeighborCandidates:
    """Directed KNN selections: row i lists the K neighbours chosen by node i."""

    indices: np.ndarray  # (N, K) int64
    distances: np.ndarray  # (N, K) Euclidean patch distances

    @property
    def k(self) -> int:
        return self.indices.shape[1]


def _check_k(count: int, k: int) -> None:
    if k < 1 or k >= count:
        raise ValueError(f"K must satisfy 1 <= K < {count} patches, got: {k}")


def _rank(d2: np.ndarray, pool: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    # pool is ascending, so a stable sort breaks distance ties by index
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return pool[order], np.take_along_axis(d2, order, axis=1)


def knn_exact(patches: PatchSet, k: int, chunk: int = 256) -> NeighborCandidates:
    """
    Quadratic-scan K nearest neighbours of every patch (self excluded).

    Args:
        patches: Patch vectors
        k: Neighbours per patch
        chunk: Query rows per distance block

    Returns:
        NeighborCandidates sorted by (distance, index)
    """
    X = patches.vectors
    count = X.shape[0]
    _check_k(count, k)

    pool = np.arange(count)
    indices = np.empty((count, k), dtype=np.int64)
    d2_out = np.empty((count, k))
    for start in range(0, count, chunk):
        stop = min(start + chunk, count)
        d2 = cdist(X[start:stop], X, "sqeuclidean")
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        indices[start:stop], d2_out[start:stop] = _rank(d2, pool, k)

    return NeighborCandidates(indices=indices, distances=np.sqrt(d2_out))


def _build_tree(X: np.ndarray, leaf_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Randomized median-split tree; returns the leaves as index arrays."""
    leaves = []
    stack = [np.arange(X.shape[0])]
    while stack:
        node = stack.pop()
        if node.size <= leaf_size:
            leaves.append(node)
            continue
        spread = X[node].var(axis=0)
        top = np.argsort(spread, kind="stable")[::-1][:_TOP_DIMS]
        dim = int(rng.choice(top))
        half = node.size // 2
        order = np.argpartition(X[node, dim], half)
        stack.append(node[order[half:]])
        stack.append(node[order[:half]])
    return leaves


def _search_forest_tree(
    X: np.ndarray, leaves: List[np.ndarray], k: int, bins: Optional[int]
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Best-bin-first search of one tree at leaf granularity.

    All points of a leaf share one probe list: the leaves ordered by the
    lower-bound distance from the leaf centroid to their bounding boxes,
    truncated to ``bins`` leaves (extended until K+1 points are covered).
    """
    lo = np.array([X[leaf].min(axis=0) for leaf in leaves])
    hi = np.array([X[leaf].max(axis=0) for leaf in leaves])
    centroid = np.array([X[leaf].mean(axis=0) for leaf in leaves])
    sizes = np.array([leaf.size for leaf in leaves])

    gap = np.maximum(lo[None, :, :] - centroid[:, None, :], 0.0) + np.maximum(
        centroid[:, None, :] - hi[None, :, :], 0.0
    )
    bound = (gap**2).sum(axis=2)
    np.fill_diagonal(bound, -1.0)
    probe_order = np.argsort(bound, axis=1, kind="stable")

    indices = np.empty((X.shape[0], k), dtype=np.int64)
    d2_out = np.empty((X.shape[0], k))
    for leaf_id, members in enumerate(leaves):
        ranked = probe_order[leaf_id]
        if bins is not None:
            covered = np.cumsum(sizes[ranked])
            needed = max(bins, int(np.searchsorted(covered, k + 1)) + 1)
            ranked = ranked[:needed]
        pool = np.sort(np.concatenate([leaves[c] for c in ranked]))
        d2 = cdist(X[members], X[pool], "sqeuclidean")
        d2[members[:, None] == pool[None, :]] = np.inf
        indices[members], d2_out[members] = _rank(d2, pool, k)

    return indices, d2_out


def knn_approx(
    patches: PatchSet,
    k: int,
    quality: Optional[int] = DEFAULT_QUALITY,
    n_trees: int = DEFAULT_TREES,
    leaf_size: int = DEFAULT_LEAF_SIZE,
    seed: int = 0,
) -> NeighborCandidates:
    """
    Approximate K nearest neighbours with a forest of randomized trees.

    Args:
        patches: Patch vectors
        k: Neighbours per patch
        quality: Total leaf probes per query across the forest; None or <= 0
            probes every leaf, which reproduces ``knn_exact``
        n_trees: Trees in the forest
        leaf_size: Maximum points per leaf
        seed: Seed of the tree randomization

    Returns:
        NeighborCandidates sorted by (distance, index)
    """
    X = patches.vectors
    count = X.shape[0]
    _check_k(count, k)
    if n_trees < 1 or leaf_size < 1:
        raise ValueError("n_trees and leaf_size must be at least 1")

    bins = None if quality is None or quality <= 0 else max(1, math.ceil(quality / n_trees))
    rng = np.random.default_rng(seed)

    found_idx, found_d2 = [], []
    for _ in range(n_trees):
        leaves = _build_tree(X, leaf_size, rng)
        tree_idx, tree_d2 = _search_forest_tree(X, leaves, k, bins)
        found_idx.append(tree_idx)
        found_d2.append(tree_d2)

    idx = np.concatenate(found_idx, axis=1)
    d2 = np.concatenate(found_d2, axis=1)

    # the same neighbour found by several trees is kept once
    by_index = np.argsort(idx, axis=1, kind="stable")
    idx = np.take_along_axis(idx, by_index, axis=1)
    d2 = np.take_along_axis(d2, by_index, axis=1)
    repeated = np.zeros(idx.shape, dtype=bool)
    repeated[:, 1:] = idx[:, 1:] == idx[:, :-1]
    d2[repeated] = np.inf

    order = np.lexsort((idx, d2), axis=-1)[:, :k]
    return NeighborCandidates(
        indices=np.take_along_axis(idx, order, axis=1),
        distances=np.sqrt(np.take_along_axis(d2, order, axis=1)),
    )


def knn_recall(approx: NeighborCandidates, exact: NeighborCandidates) -> float:
    """Fraction of the exact neighbours recovered by an approximate search."""
    if approx.indices.shape != exact.indices.shape:
        raise ValueError("Candidate sets must have the same shape")
    hits = sum(
        np.intersect1d(a, e, assume_unique=True).size
        for a, e in zip(approx.indices, exact.indices)
    )
    return hits / exact.indices.size
