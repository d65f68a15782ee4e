"""Patch graphs: extraction, neighbour search and graph operators"""

from agtv_tomo.graph.graph import (
    PatchGraph,
    build_graph,
    connected_components,
    divergence,
    export_edge_list,
    gradient,
    graph_tv,
    grid_graph,
    laplacian,
    operator_norm,
    patch_graph,
)
from agtv_tomo.graph.knn import NeighborCandidates, knn_approx, knn_exact, knn_recall
from agtv_tomo.graph.patches import PatchSet, extract_patches

__all__ = [
    "NeighborCandidates",
    "PatchGraph",
    "PatchSet",
    "build_graph",
    "connected_components",
    "divergence",
    "export_edge_list",
    "extract_patches",
    "gradient",
    "graph_tv",
    "grid_graph",
    "knn_approx",
    "knn_exact",
    "knn_recall",
    "laplacian",
    "operator_norm",
    "patch_graph",
]
