"""Filtered back projection with a cropped Ram-Lak filter"""

import logging
import math
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy import fft

from agtv_tomo.phantom import Image

logger = logging.getLogger(__name__)


class FbpConfig(BaseModel):
    """Filtered back projection settings."""

    filter: Literal["ram_lak_cropped"] = Field(default="ram_lak_cropped")
    crop_fraction: float = Field(
        default=0.8, gt=0.0, le=1.0, description="Cut-off as a fraction of Nyquist"
    )
    interpolation: Literal["linear"] = Field(default="linear")


def ram_lak_response(p: int, spacing: float, crop_fraction: float) -> np.ndarray:
    """
    Frequency response of the cropped Ram-Lak filter on a zero-padded grid.

    The band-limited ramp is built from its sampled spatial kernel, so the
    zero-frequency term is correct, then cut at ``crop_fraction`` of Nyquist.

    Args:
        p: Detector bins per projection
        spacing: Detector bin width in image units
        crop_fraction: Cut-off as a fraction of Nyquist, in (0, 1]

    Returns:
        Real response of length next power of two >= 2p, scaled by the spacing
    """
    size = 1 << (2 * p - 1).bit_length()
    k = np.concatenate([np.arange(0, size // 2 + 1), np.arange(-size // 2 + 1, 0)])

    kernel = np.zeros(size)
    kernel[0] = 1.0 / (4.0 * spacing**2)
    odd = k % 2 == 1
    kernel[odd] = -1.0 / (math.pi * k[odd] * spacing) ** 2

    response = spacing * np.real(fft.fft(kernel))
    response[np.abs(fft.fftfreq(size)) > 0.5 * crop_fraction] = 0.0
    return response


def fbp_reconstruct(
    sino: np.ndarray,
    angles: Sequence[float],
    n: int,
    cfg: Optional[FbpConfig] = None,
    spacing: Optional[float] = None,
) -> Image:
    """
    Reconstruct an n x n image from a (q, p) sinogram.

    Args:
        sino: Sinogram, one row of p ray sums per angle
        angles: Angles in degrees matching the sinogram rows
        n: Output image side length
        cfg: Filter settings (defaults to a Ram-Lak filter cropped at 0.8 Nyquist)
        spacing: Detector bin width in the [-1, 1] image frame (defaults to 2*sqrt(2)/p)

    Returns:
        n x n image
    """
    cfg = cfg or FbpConfig()
    sino = np.asarray(sino, dtype=np.float64)
    angles = np.asarray(angles, dtype=np.float64).ravel()
    if sino.ndim != 2 or sino.shape[0] != angles.size:
        raise ValueError(
            f"Sinogram shape {sino.shape} does not match {angles.size} angles"
        )
    if n < 1:
        raise ValueError(f"Image side must be at least 1, got: {n}")

    q, p = sino.shape
    spacing = 2.0 * math.sqrt(2.0) / p if spacing is None else spacing
    response = ram_lak_response(p, spacing, cfg.crop_fraction)
    filtered = np.real(fft.ifft(fft.fft(sino, n=response.size, axis=1) * response, axis=1))
    filtered = filtered[:, :p]

    offsets = (np.arange(p) - (p - 1) / 2.0) * spacing
    centers = (np.arange(n) - (n - 1) / 2.0) * (2.0 / n)
    x, y = np.meshgrid(centers, centers[::-1])

    image = np.zeros((n, n))
    for angle, profile in zip(np.radians(angles), filtered):
        t = x * math.cos(angle) + y * math.sin(angle)
        image += np.interp(t, offsets, profile, left=0.0, right=0.0)

    logger.debug(f"FBP of {q} views onto {n}x{n}, crop {cfg.crop_fraction}")
    return image * (math.pi / q)
