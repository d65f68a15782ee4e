"""Weighted patch graphs and their difference operators

Edges are stored once, oriented i < j. The graph gradient of x on edge (i, j)
is sqrt(w_ij) * (x_i - x_j); the divergence is its exact adjoint, so
||gradient(x)||^2 = x^T L x with L = D - W.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from agtv_tomo.graph.knn import DEFAULT_QUALITY, NeighborCandidates, knn_approx, knn_exact
from agtv_tomo.graph.patches import extract_patches
from agtv_tomo.phantom import Image
from agtv_tomo.utils.linalg import PowerIterationResult, power_iteration

logger = logging.getLogger(__name__)

SigmaRule = Literal["mean_connected_distance"]


@dataclass(frozen=True)
class PatchGraph:
    """Undirected weighted graph over the n^2 pixels of an image."""

    node_count: int
    edges_i: np.ndarray
    edges_j: np.ndarray
    weights: np.ndarray
    sigma: float = 0.0
    k: int = 0
    patch_side: int = 0

    def __post_init__(self):
        if not self.edges_i.shape == self.edges_j.shape == self.weights.shape:
            raise ValueError("Edge endpoint and weight arrays must have the same length")
        if self.edges_i.size:
            if np.any(self.edges_i >= self.edges_j):
                raise ValueError("Edges must be oriented i < j without self-loops")
            if self.edges_i.min() < 0 or self.edges_j.max() >= self.node_count:
                raise ValueError("Edge endpoint out of range")
            if np.any(self.weights <= 0.0) or np.any(self.weights > 1.0):
                raise ValueError("Edge weights must lie in (0, 1]")

    @property
    def edge_count(self) -> int:
        return int(self.edges_i.size)

    @cached_property
    def incidence(self) -> sparse.csr_matrix:
        """Weighted incidence matrix (|E| x N): the graph gradient operator."""
        rows = np.arange(self.edge_count)
        root_w = np.sqrt(self.weights)
        return sparse.csr_matrix(
            (
                np.concatenate([root_w, -root_w]),
                (np.concatenate([rows, rows]), np.concatenate([self.edges_i, self.edges_j])),
            ),
            shape=(self.edge_count, self.node_count),
        )

    @cached_property
    def incidence_t(self) -> sparse.csr_matrix:
        return self.incidence.T.tocsr()


def build_graph(
    candidates: NeighborCandidates,
    sigma_rule: SigmaRule = "mean_connected_distance",
    patch_side: int = 0,
) -> PatchGraph:
    """
    Turn directed KNN selections into a symmetric Gaussian-weighted graph.

    sigma is the mean of all directed candidate distances. An edge exists when
    either endpoint selected the other; w_ij = exp(-d_ij^2 / sigma^2), or 1 for
    every edge when sigma is 0.

    Args:
        candidates: Output of ``knn_exact`` or ``knn_approx``
        sigma_rule: Bandwidth rule (only the mean connected distance)
        patch_side: Patch side recorded on the graph

    Returns:
        PatchGraph
    """
    if sigma_rule != "mean_connected_distance":
        raise ValueError(f"Unknown sigma rule: {sigma_rule}")
    count, k = candidates.indices.shape
    if count == 0 or k == 0:
        raise ValueError("Cannot build a graph from an empty candidate set")

    src = np.repeat(np.arange(count, dtype=np.int64), k)
    dst = candidates.indices.ravel().astype(np.int64)
    dist = candidates.distances.ravel()
    if np.any(src == dst):
        raise ValueError("Candidate sets must not contain self-matches")

    sigma = float(dist.mean())

    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    _, first = np.unique(lo * count + hi, return_index=True)
    edges_i, edges_j, d = lo[first], hi[first], dist[first]

    if sigma == 0.0:
        weights = np.ones(edges_i.size)
    else:
        weights = np.exp(-((d / sigma) ** 2))
        kept = weights > 0.0
        if not np.all(kept):
            logger.debug(f"Dropping {np.count_nonzero(~kept)} edges with underflowed weight")
            edges_i, edges_j, weights = edges_i[kept], edges_j[kept], weights[kept]

    return PatchGraph(
        node_count=count,
        edges_i=edges_i,
        edges_j=edges_j,
        weights=weights,
        sigma=sigma,
        k=k,
        patch_side=patch_side,
    )


def grid_graph(n: int) -> PatchGraph:
    """4-neighbour lattice over an n x n image with unit weights (standard TV)."""
    if n < 1:
        raise ValueError(f"Grid side must be at least 1, got: {n}")
    idx = np.arange(n * n, dtype=np.int64).reshape(n, n)
    edges_i = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    edges_j = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return PatchGraph(
        node_count=n * n,
        edges_i=edges_i,
        edges_j=edges_j,
        weights=np.ones(edges_i.size),
        sigma=0.0,
        k=4,
        patch_side=1,
    )


def patch_graph(
    img: Image,
    l: int,
    k: int,
    exact: bool = False,
    quality: Optional[int] = DEFAULT_QUALITY,
    seed: int = 0,
) -> PatchGraph:
    """
    Build the K-nearest-neighbour patch graph of an image.

    Args:
        img: Square image
        l: Odd patch side
        k: Neighbours per pixel
        exact: Use the quadratic scan instead of the randomized forest
        quality: Leaf probe budget of the approximate search
        seed: Seed of the approximate search

    Returns:
        PatchGraph over the n^2 pixels
    """
    patches = extract_patches(img, l)
    if exact:
        candidates = knn_exact(patches, k)
    else:
        candidates = knn_approx(patches, k, quality=quality, seed=seed)
    graph = build_graph(candidates, patch_side=l)
    logger.debug(
        f"Patch graph: {graph.node_count} nodes, {graph.edge_count} edges, sigma={graph.sigma:.4g}"
    )
    return graph


def _check_nodes(G: PatchGraph, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != G.node_count:
        raise ValueError(f"Vector has {x.size} entries but the graph has {G.node_count} nodes")
    return x


def gradient(G: PatchGraph, x: np.ndarray) -> np.ndarray:
    """Edge vector sqrt(w_ij) * (x_i - x_j) over the oriented edges."""
    return G.incidence @ _check_nodes(G, x)


def divergence(G: PatchGraph, d: np.ndarray) -> np.ndarray:
    """Adjoint of ``gradient``: node vector grad^T d."""
    d = np.asarray(d, dtype=np.float64).ravel()
    if d.size != G.edge_count:
        raise ValueError(f"Edge vector has {d.size} entries but the graph has {G.edge_count} edges")
    return G.incidence_t @ d


def laplacian(G: PatchGraph) -> sparse.csr_matrix:
    """Combinatorial Laplacian L = D - W."""
    n = G.node_count
    upper = sparse.coo_matrix((G.weights, (G.edges_i, G.edges_j)), shape=(n, n))
    W = (upper + upper.T).tocsr()
    degree = np.asarray(W.sum(axis=1)).ravel()
    return (sparse.diags(degree) - W).tocsr()


def graph_tv(G: PatchGraph, x: np.ndarray) -> float:
    """Graph total variation ||grad x||_1."""
    return float(np.abs(gradient(G, x)).sum())


def operator_norm(
    G: PatchGraph, iterations: int = 1000, tol: float = 1e-10, seed: int = 0
) -> PowerIterationResult:
    """
    Estimate ||grad||_2 = sqrt(lambda_max(L)) by power iteration on grad^T grad.

    Returns:
        PowerIterationResult whose ``value`` is the operator norm
    """
    if G.edge_count == 0:
        return PowerIterationResult(value=0.0, converged=True, iterations=0)
    estimate = power_iteration(
        lambda v: G.incidence_t @ (G.incidence @ v), G.node_count, iterations, tol, seed
    )
    return PowerIterationResult(
        value=float(np.sqrt(max(estimate.value, 0.0))),
        converged=estimate.converged,
        iterations=estimate.iterations,
    )


def connected_components(G: PatchGraph) -> int:
    """Number of connected components of the graph."""
    n = G.node_count
    adjacency = sparse.coo_matrix((G.weights, (G.edges_i, G.edges_j)), shape=(n, n))
    count, _ = csgraph.connected_components(adjacency, directed=False)
    return int(count)


def export_edge_list(G: PatchGraph, path: Path) -> None:
    """
    Write the graph as text: a header ``n K sigma`` then one ``i j w_ij`` line per edge.

    ``n`` is the side of the image whose n^2 pixels are the nodes.

    Args:
        G: Graph over a square image
        path: Destination file
    """
    side = math.isqrt(G.node_count)
    if side * side != G.node_count:
        raise ValueError(f"Graph with {G.node_count} nodes does not cover a square image")
    table = np.column_stack([G.edges_i, G.edges_j, G.weights])
    np.savetxt(
        path,
        table,
        fmt=["%d", "%d", "%.17g"],
        header=f"{side} {G.k} {G.sigma:.17g}",
        comments="",
    )
