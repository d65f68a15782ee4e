"""Tests for the exact and approximate neighbour searches"""

import numpy as np
import pytest

from agtv_tomo.fbp import fbp_reconstruct
from agtv_tomo.graph import extract_patches, knn_approx, knn_exact, knn_recall
from agtv_tomo.graph.patches import PatchSet
from agtv_tomo.projector import add_poisson_noise, project


@pytest.fixture(scope="module")
def fbp_patches(system32, phantom32):
    noisy = add_poisson_noise(project(system32, phantom32), 0.1, seed=1)
    recon = fbp_reconstruct(noisy, system32.angles, 32)
    return extract_patches(recon, 3)


def _brute_force(X: np.ndarray, k: int) -> np.ndarray:
    out = []
    for i, row in enumerate(X):
        d = np.sum((X - row) ** 2, axis=1)
        d[i] = np.inf
        out.append(np.lexsort((np.arange(len(X)), d))[:k])
    return np.array(out)


def test_exact_matches_brute_force(rng):
    X = rng.standard_normal((120, 9))
    found = knn_exact(PatchSet(patch_side=3, vectors=X), 6, chunk=50)
    assert np.array_equal(found.indices, _brute_force(X, 6))
    assert found.k == 6
    assert np.all(np.diff(found.distances, axis=1) >= 0.0)
    expected = np.linalg.norm(X[0] - X[found.indices[0, 0]])
    assert found.distances[0, 0] == pytest.approx(expected)


def test_ties_resolve_to_smaller_index():
    patches = extract_patches(np.array([[0.0, 1.0], [1.0, 1.0]]), 1)
    found = knn_exact(patches, 1)
    assert found.indices[:, 0].tolist() == [1, 2, 1, 1]


def test_collinear_points():
    patches = extract_patches(np.arange(16.0).reshape(4, 4), 1)
    found = knn_exact(patches, 2)
    assert found.indices[0].tolist() == [1, 2]
    assert found.indices[5].tolist() == [4, 6]
    assert np.allclose(found.distances[5], [1.0, 1.0])


def test_self_is_never_a_neighbour(fbp_patches):
    found = knn_exact(fbp_patches, 4)
    assert not np.any(found.indices == np.arange(fbp_patches.count)[:, None])


def test_invalid_k():
    patches = extract_patches(np.zeros((2, 2)), 1)
    with pytest.raises(ValueError):
        knn_exact(patches, 0)
    with pytest.raises(ValueError):
        knn_exact(patches, 4)
    with pytest.raises(ValueError):
        knn_approx(patches, 4)


@pytest.mark.parametrize("quality", [None, 0, -1])
def test_unbounded_approx_is_exact(fbp_patches, quality):
    exact = knn_exact(fbp_patches, 5)
    approx = knn_approx(fbp_patches, 5, quality=quality, seed=3)
    assert np.array_equal(approx.indices, exact.indices)
    assert np.allclose(approx.distances, exact.distances)


def test_approx_recall_at_default_quality(fbp_patches):
    exact = knn_exact(fbp_patches, 10)
    approx = knn_approx(fbp_patches, 10)
    assert knn_recall(approx, exact) >= 0.9


def test_approx_returns_distinct_neighbours(fbp_patches):
    approx = knn_approx(fbp_patches, 10, quality=4)
    assert approx.indices.shape == (1024, 10)
    assert all(len(set(row)) == 10 for row in approx.indices.tolist())
    assert not np.any(approx.indices == np.arange(1024)[:, None])


def test_approx_is_seeded(fbp_patches):
    first = knn_approx(fbp_patches, 5, quality=8, seed=11)
    again = knn_approx(fbp_patches, 5, quality=8, seed=11)
    assert np.array_equal(first.indices, again.indices)


def test_recall_shape_mismatch(fbp_patches):
    with pytest.raises(ValueError):
        knn_recall(knn_exact(fbp_patches, 3), knn_exact(fbp_patches, 4))
