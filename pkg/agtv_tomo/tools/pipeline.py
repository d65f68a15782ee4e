"""Blocking building blocks of the experiment tools"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from agtv_tomo.errors import ConfigError
from agtv_tomo.metrics import MetricReport, metric_report
from agtv_tomo.phantom import Image, ellipse_phantom, load_phantom_spec, shepp_logan
from agtv_tomo.projector import (
    ProjectionMatrix,
    Sinogram,
    add_gaussian_noise,
    add_poisson_noise,
    build_system_matrix,
    equispaced_angles,
    project,
)
from agtv_tomo.solvers import ReconResult, SolverConfig, reconstruct
from agtv_tomo.storage import FileStorage, StorageBackend
from agtv_tomo.tools.models import RunConfig

logger = logging.getLogger(__name__)

PHANTOM_FILE = "phantom.img"
SINOGRAM_FILE = "sino.sin"


@dataclass
class Acquisition:
    """Ground truth (when known), geometry and measured data of one run."""

    A: ProjectionMatrix
    noisy: Sinogram
    truth: Optional[Image] = None
    clean: Optional[Sinogram] = None


def make_phantom(cfg: RunConfig) -> Image:
    """Ground-truth image: an input image file, a JSON ellipse spec or Shepp-Logan."""
    if cfg.image_path is not None:
        image = FileStorage(cfg.image_path.parent).load_image(cfg.image_path.name)
        if image.shape != (cfg.n, cfg.n):
            logger.info(f"Input image is {image.shape[0]}x{image.shape[1]}; using its size")
        return image
    if cfg.phantom_spec is not None:
        return ellipse_phantom(load_phantom_spec(cfg.phantom_spec), cfg.n)
    return shepp_logan(cfg.n, cfg.variant)


def same_geometry(A: ProjectionMatrix, n: int, p: int, angles: np.ndarray) -> bool:
    return A.n == n and A.p == p and A.angles.shape == angles.shape and np.array_equal(A.angles, angles)


def system_matrix(
    n: int,
    angle_count: int,
    angle_range: float,
    rays: Optional[int],
    storage: Optional[StorageBackend] = None,
) -> Tuple[ProjectionMatrix, bool]:
    """
    Build A, or load it from ``storage`` when the stored geometry matches.

    Returns:
        (A, reused)
    """
    angles = equispaced_angles(angle_count, angle_range)
    p = rays or n
    if storage is not None:
        stored = storage.load_system()
        if stored is not None and same_geometry(stored, n, p, angles):
            logger.info("Reusing stored system matrix")
            return stored, True
    return build_system_matrix(n, angles, p), False


def add_noise(b: Sinogram, model: str, level: float, seed: int) -> Sinogram:
    if model == "poisson":
        return add_poisson_noise(b, level, seed)
    if model == "gaussian":
        return add_gaussian_noise(b, level, seed)
    raise ConfigError(f"Unknown noise model: {model}")


def acquire(
    cfg: RunConfig,
    truth: Image,
    A: Optional[ProjectionMatrix] = None,
) -> Acquisition:
    """Project ``truth`` and corrupt the sinogram with the configured noise."""
    if A is None:
        A, _ = system_matrix(truth.shape[0], cfg.angle_count, cfg.angle_range, cfg.rays)
    clean = project(A, truth)
    noisy = add_noise(clean, cfg.noise_model, cfg.noise_level, cfg.noise_seed)
    return Acquisition(A=A, noisy=noisy, truth=truth, clean=clean)


def load_acquisition(cfg: RunConfig) -> Acquisition:
    """
    Read the sinogram (and ground truth, when present) written by the project command.

    The geometry comes from the stored system matrix, or is rebuilt from the
    configuration when the matrix is absent.
    """
    if cfg.input_dir is None:
        raise ConfigError("input_dir is required to load an acquisition")
    storage = FileStorage(cfg.input_dir)
    noisy = storage.load_sinogram(SINOGRAM_FILE)

    A = storage.load_system()
    if A is None:
        A, _ = system_matrix(cfg.n, cfg.angle_count, cfg.angle_range, cfg.rays)
    if noisy.shape != (A.q, A.p):
        raise ConfigError(f"Sinogram shape {noisy.shape} does not match the geometry ({A.q}, {A.p})")

    truth = None
    if storage.path(PHANTOM_FILE).exists():
        truth = storage.load_image(PHANTOM_FILE)
    else:
        logger.info("No ground truth next to the sinogram; rel_l2_error is not reported")
    return Acquisition(A=A, noisy=noisy, truth=truth)


def prepare(cfg: RunConfig) -> Acquisition:
    """Load an existing acquisition or simulate one."""
    if cfg.input_dir is not None:
        return load_acquisition(cfg)
    return acquire(cfg, make_phantom(cfg))


def evaluate(
    method: str,
    acquisition: Acquisition,
    solver: SolverConfig,
    profile_row: Optional[int] = None,
) -> Tuple[ReconResult, MetricReport]:
    """Reconstruct with ``method`` and score the result."""
    result = reconstruct(method, acquisition.A, acquisition.noisy, solver)
    report = metric_report(result.image, acquisition.truth, profile_row)
    logger.info(
        f"{method}: rel_l2_error={report.rel_l2_error}, wall_time={result.wall_time:.2f}s"
    )
    return result, report
