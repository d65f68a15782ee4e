"""Parallel-beam projection operator, sinograms and measurement noise

Geometry: the n x n image covers the square [-1, 1]^2, the same frame the
phantoms are drawn in, so a pixel has side h = 2/n (row 0 at the top). A ray
at angle theta and detector offset t is the line
x*cos(theta) + y*sin(theta) = t. The p rays of each angle are equally spaced
across the circumscribing diameter 2*sqrt(2). Matrix rows are angle-major:
row = angle_index * p + ray_index, so vec(S) is ``sinogram.ravel()`` for a
sinogram stored as a (q, p) array.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy import sparse

logger = logging.getLogger(__name__)

# (q, p) float64 array: one row of p ray sums per angle
Sinogram = npt.NDArray[np.float64]

_EPS = 1e-10


@dataclass(frozen=True)
class ProjectionMatrix:
    """Sparse system matrix A with the geometry that produced it."""

    matrix: sparse.csr_matrix
    n: int
    p: int
    angles: np.ndarray
    spacing: float

    @property
    def q(self) -> int:
        return len(self.angles)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def detector_offsets(self) -> np.ndarray:
        """Signed offsets t of the p rays, in image units (the image spans [-1, 1])."""
        return detector_offsets(self.p, self.spacing)


def equispaced_angles(count: int, angle_range: float = 180.0) -> np.ndarray:
    """Return ``count`` angles in degrees, equally spaced over [0, angle_range)."""
    if count < 1:
        raise ValueError(f"Angle count must be at least 1, got: {count}")
    if not 0.0 < angle_range <= 180.0:
        raise ValueError(f"Angle range must be in (0, 180], got: {angle_range}")
    return np.arange(count) * (angle_range / count)


def detector_offsets(p: int, spacing: float) -> np.ndarray:
    """Centres of p detector bins of width ``spacing``, symmetric about 0."""
    return (np.arange(p) - (p - 1) / 2.0) * spacing


def _trace_ray(
    n: int, ox: float, oy: float, ux: float, uy: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Return (pixel indices, intersection lengths) of one ray, both in pixel units."""
    half = n / 2.0
    s_lo, s_hi = -math.inf, math.inf

    for origin, direction in ((ox, ux), (oy, uy)):
        if abs(direction) < _EPS:
            if abs(origin) >= half:
                return np.empty(0, dtype=np.int64), np.empty(0)
            continue
        s1 = (-half - origin) / direction
        s2 = (half - origin) / direction
        s_lo = max(s_lo, min(s1, s2))
        s_hi = min(s_hi, max(s1, s2))

    if s_hi - s_lo <= _EPS:
        return np.empty(0, dtype=np.int64), np.empty(0)

    grid = np.arange(n + 1) - half
    crossings = [np.array([s_lo, s_hi])]
    for origin, direction in ((ox, ux), (oy, uy)):
        if abs(direction) < _EPS:
            continue
        s = (grid - origin) / direction
        crossings.append(s[(s > s_lo) & (s < s_hi)])

    s_all = np.unique(np.concatenate(crossings))
    lengths = np.diff(s_all)
    mid = 0.5 * (s_all[:-1] + s_all[1:])
    keep = lengths > _EPS
    lengths, mid = lengths[keep], mid[keep]

    col = np.clip(np.floor(ox + mid * ux + half).astype(np.int64), 0, n - 1)
    row = np.clip(np.floor(half - (oy + mid * uy)).astype(np.int64), 0, n - 1)
    return row * n + col, lengths


def build_system_matrix(
    n: int, angles: Sequence[float], p: Optional[int] = None
) -> ProjectionMatrix:
    """
    Build the parallel-beam system matrix by exact ray tracing.

    Entry (row, col) is the length of the intersection of ray ``row`` with
    pixel ``col``, measured in the [-1, 1] image frame (pixel side 2/n).

    Args:
        n: Image side length
        angles: Projection angles in degrees, each in [0, 180)
        p: Rays per angle (defaults to n)

    Returns:
        ProjectionMatrix of shape (p * q, n * n)
    """
    if n < 1:
        raise ValueError(f"Image side must be at least 1, got: {n}")
    p = n if p is None else p
    if p < 1:
        raise ValueError(f"Rays per angle must be at least 1, got: {p}")

    angles = np.asarray(angles, dtype=np.float64).ravel()
    if angles.size == 0:
        raise ValueError("At least one projection angle is required")
    if not np.all(np.isfinite(angles)) or np.any(angles < 0.0) or np.any(angles >= 180.0):
        raise ValueError("Projection angles must lie in [0, 180) degrees")
    if np.unique(angles).size != angles.size:
        logger.warning("Duplicate projection angles: their rows are repeated in A")

    h = 2.0 / n
    spacing = 2.0 * math.sqrt(2.0) / p
    offsets = detector_offsets(p, spacing)

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    for a, angle in enumerate(angles):
        theta = math.radians(angle)
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        for r, t in enumerate(offsets):
            # the tracer walks the grid in pixel units
            pixels, lengths = _trace_ray(n, t * cos_t / h, t * sin_t / h, -sin_t, cos_t)
            rows.append(np.full(pixels.size, a * p + r, dtype=np.int64))
            cols.append(pixels)
            vals.append(lengths * h)

    matrix = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(p * angles.size, n * n),
    )
    logger.info(
        f"Built system matrix {matrix.shape[0]}x{matrix.shape[1]} with {matrix.nnz} non-zeros"
    )
    return ProjectionMatrix(matrix=matrix, n=n, p=p, angles=angles, spacing=spacing)


def project(A: ProjectionMatrix, x: np.ndarray) -> Sinogram:
    """Compute the sinogram of image x as a (q, p) array (b = A vec(x))."""
    x = np.asarray(x, dtype=np.float64)
    if x.size != A.cols:
        raise ValueError(f"Image has {x.size} pixels but A expects {A.cols}")
    return (A.matrix @ x.ravel()).reshape(A.q, A.p)


def back_project(A: ProjectionMatrix, sinogram: np.ndarray) -> np.ndarray:
    """Apply the adjoint A^T to a sinogram; returns an n x n image."""
    sinogram = np.asarray(sinogram, dtype=np.float64)
    if sinogram.size != A.rows:
        raise ValueError(f"Sinogram has {sinogram.size} values but A has {A.rows} rows")
    return (A.matrix.T @ sinogram.ravel()).reshape(A.n, A.n)


def _check_level(level: float) -> None:
    if not 0.0 <= level < 1.0:
        raise ValueError(f"Noise level must be in [0, 1), got: {level}")


def add_poisson_noise(b: np.ndarray, level: float, seed: int) -> np.ndarray:
    """
    Corrupt data with Poisson counting noise of a given relative level.

    The data are scaled to counts by c = sum(b) / (level^2 * ||b||^2), sampled
    as Poisson(c * b) and scaled back, so E[b_noisy] = b and the expected
    squared relative error equals level^2.

    Args:
        b: Non-negative sinogram (any shape)
        level: Target relative noise ||b_noisy - b|| / ||b||
        seed: Seed of the generator

    Returns:
        Noisy copy of b
    """
    b = np.asarray(b, dtype=np.float64)
    _check_level(level)
    if np.any(b < 0.0):
        raise ValueError("Poisson noise requires a non-negative sinogram")
    if level == 0.0 or not np.any(b > 0.0):
        return b.copy()

    counts_per_unit = b.sum() / (level**2 * np.dot(b.ravel(), b.ravel()))
    rng = np.random.default_rng(seed)
    return rng.poisson(counts_per_unit * b) / counts_per_unit


def add_gaussian_noise(b: np.ndarray, level: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise with standard deviation level * ||b|| / sqrt(size)."""
    b = np.asarray(b, dtype=np.float64)
    _check_level(level)
    if level == 0.0:
        return b.copy()

    sigma = level * np.linalg.norm(b) / math.sqrt(b.size)
    rng = np.random.default_rng(seed)
    return b + rng.normal(0.0, sigma, size=b.shape)


def relative_noise(b_noisy: np.ndarray, b: np.ndarray) -> float:
    """Realized relative noise ||b_noisy - b|| / ||b||."""
    return float(np.linalg.norm(b_noisy - b) / np.linalg.norm(b))
