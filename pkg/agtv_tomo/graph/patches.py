"""Overlapping patch extraction"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from agtv_tomo.phantom import Image


@dataclass(frozen=True)
class PatchSet:
    """One vectorized l x l patch per pixel, in row-major pixel order."""

    patch_side: int
    vectors: np.ndarray  # (n*n, l*l)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]


def extract_patches(img: Image, l: int) -> PatchSet:
    """
    Extract the l x l patch centred at every pixel.

    Borders are mirror padded with the edge sample repeated
    (``[a b c] -> b a | a b c | c b``).

    Args:
        img: Square image
        l: Odd patch side

    Returns:
        PatchSet with n*n vectors of length l*l
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"Patches need a 2-D image, got shape {img.shape}")
    if l < 1 or l % 2 == 0:
        raise ValueError(f"Patch side must be odd and positive, got: {l}")

    r = l // 2
    padded = np.pad(img, r, mode="symmetric")
    windows = sliding_window_view(padded, (l, l))
    vectors = windows.reshape(img.shape[0] * img.shape[1], l * l).copy()
    return PatchSet(patch_side=l, vectors=vectors)
