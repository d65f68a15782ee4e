"""Orthonormal 2-D wavelet analysis and synthesis"""

import logging
import warnings
from functools import lru_cache
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pywt

from agtv_tomo.phantom import Image

logger = logging.getLogger(__name__)

WAVELET = "db2"  # Daubechies, 4 taps
MODE = "periodization"


@dataclass(frozen=True)
class WaveletCoeffs:
    """Coefficients packed in pywt's ``coeffs_to_array`` layout (n x n)."""

    n: int
    levels: int
    data: np.ndarray


def default_levels(n: int) -> int:
    """
    Decomposition depth leaving a 4x4 approximation band.

    Capped by the number of times n can be halved exactly.
    """
    target = max(int(np.log2(n)) - 2, 0) if n > 0 else 0
    levels = 0
    while levels < target and n % (2 ** (levels + 1)) == 0:
        levels += 1
    return levels


def _check_levels(n: int, levels: int) -> None:
    if levels < 0:
        raise ValueError(f"Wavelet levels must be non-negative, got: {levels}")
    if n % (2**levels) != 0:
        raise ValueError(
            f"Image side {n} is not divisible by 2^{levels}; "
            f"reduce levels to at most {default_levels(n)} or pad the image"
        )


@lru_cache(maxsize=32)
def _slices(n: int, levels: int):
    # slice layout only depends on the shape, so derive it from a zero image
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        coeffs = pywt.wavedec2(np.zeros((n, n)), WAVELET, mode=MODE, level=levels)
    return pywt.coeffs_to_array(coeffs)[1]


def analyze(x: Image, levels: Optional[int] = None) -> WaveletCoeffs:
    """
    Forward transform Phi^*(x).

    Args:
        x: Square image
        levels: Decomposition depth (defaults to ``default_levels(n)``)

    Returns:
        Coefficients with the same energy as x
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"Wavelet analysis needs a square image, got shape {x.shape}")
    n = x.shape[0]
    levels = default_levels(n) if levels is None else levels
    _check_levels(n, levels)

    if levels == 0:
        return WaveletCoeffs(n=n, levels=0, data=x.copy())

    with warnings.catch_warnings():
        # short signals at deep levels wrap around, which periodization handles exactly
        warnings.simplefilter("ignore", UserWarning)
        coeffs = pywt.wavedec2(x, WAVELET, mode=MODE, level=levels)
    data, _ = pywt.coeffs_to_array(coeffs)
    return WaveletCoeffs(n=n, levels=levels, data=data)


def synthesize(c: WaveletCoeffs) -> Image:
    """Inverse transform Phi(c)."""
    data = np.asarray(c.data, dtype=np.float64)
    if data.shape != (c.n, c.n):
        raise ValueError(f"Coefficient array shape {data.shape} does not match n={c.n}")
    _check_levels(c.n, c.levels)

    if c.levels == 0:
        return data.copy()

    coeffs = pywt.array_to_coeffs(data, _slices(c.n, c.levels), output_format="wavedec2")
    return pywt.waverec2(coeffs, WAVELET, mode=MODE)
