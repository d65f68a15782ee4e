"""Reconstruction quality metrics"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import fft

from agtv_tomo.phantom import Image

logger = logging.getLogger(__name__)


class MetricReport(BaseModel):
    """Quality summary of one reconstruction."""

    rel_l2_error: Optional[float] = Field(default=None, ge=0.0, description="None without ground truth")
    profile_row: int = Field(ge=0)
    profile: List[float] = Field(default_factory=list)
    raps: List[float] = Field(default_factory=list, description="Power per integer radius bin")


def _square(x: Image, name: str = "image") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"{name} must be a square 2-D array, got shape {x.shape}")
    return x


def rel_l2_error(x: Image, x_true: Image) -> float:
    """||x - x_true|| / ||x_true||."""
    x = np.asarray(x, dtype=np.float64)
    x_true = np.asarray(x_true, dtype=np.float64)
    if x.shape != x_true.shape:
        raise ValueError(f"Shape mismatch: {x.shape} vs {x_true.shape}")
    reference = np.linalg.norm(x_true)
    if reference == 0.0:
        raise ValueError("Relative error is undefined for an all-zero ground truth")
    return float(np.linalg.norm(x - x_true) / reference)


def intensity_profile(x: Image, row: int) -> np.ndarray:
    """Intensities of one image row, in column order."""
    x = _square(x)
    if not 0 <= row < x.shape[0]:
        raise ValueError(f"Row {row} outside [0, {x.shape[0]})")
    return x[row].copy()


def radial_bins(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rounded integer radius of every frequency of a centred n x n spectrum.

    Returns:
        (labels, counts): an n x n array of radii and the number of
        frequencies per radius 0 .. n/2 - 1
    """
    if n < 2 or n % 2:
        raise ValueError(f"Radial binning needs an even side, got: {n}")
    k = np.arange(n) - n // 2
    u, v = np.meshgrid(k, k)
    labels = np.rint(np.hypot(u, v)).astype(np.int64)
    counts = np.bincount(labels.ravel(), minlength=n // 2)[: n // 2]
    return labels, counts


def raps(x: Image) -> np.ndarray:
    """
    Radially averaged power spectrum.

    |F(u, v)|^2 averaged over annuli of rounded integer radius 0 .. n/2 - 1
    about the zero frequency; corner frequencies beyond n/2 are left out.
    """
    x = _square(x)
    labels, counts = radial_bins(x.shape[0])
    power = np.abs(fft.fftshift(fft.fft2(x))) ** 2

    inside = labels < counts.size
    totals = np.bincount(labels[inside], weights=power[inside], minlength=counts.size)
    return totals / counts


def metric_report(x: Image, x_true: Optional[Image] = None, row: Optional[int] = None) -> MetricReport:
    """
    Collect error, profile and RAPS of a reconstruction.

    Args:
        x: Reconstruction
        x_true: Ground truth, when known
        row: Profile row (defaults to the centre row n // 2)

    Returns:
        MetricReport
    """
    x = _square(x)
    n = x.shape[0]
    row = n // 2 if row is None else row
    return MetricReport(
        rel_l2_error=None if x_true is None else rel_l2_error(x, x_true),
        profile_row=row,
        profile=intensity_profile(x, row).tolist(),
        raps=raps(x).tolist() if n % 2 == 0 else [],
    )
