"""Analytic ellipse phantoms rasterized on the unit square"""

import json
import logging
import math
from importlib import resources
from pathlib import Path
from typing import List, Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

logger = logging.getLogger(__name__)

# n x n float64 array, row 0 at the top of the [-1, 1]^2 square
Image = npt.NDArray[np.float64]

SheppLoganVariant = Literal["modified", "original"]


class EllipseSpec(BaseModel):
    """One additive ellipse of a phantom."""

    model_config = ConfigDict(populate_by_name=True, allow_inf_nan=False, frozen=True)

    center_x: float = Field(ge=-1.0, le=1.0, description="Centre x in [-1, 1]")
    center_y: float = Field(ge=-1.0, le=1.0, description="Centre y in [-1, 1], y up")
    semi_axis_a: float = Field(gt=0.0, le=1.0, alias="a", description="Semi-axis along x before rotation")
    semi_axis_b: float = Field(gt=0.0, le=1.0, alias="b", description="Semi-axis along y before rotation")
    rotation: float = Field(default=0.0, description="Counter-clockwise rotation in radians")
    additive_intensity: float = Field(alias="intensity", description="Density added inside the ellipse")

    @model_validator(mode="before")
    @classmethod
    def _degrees_to_radians(cls, data):
        if isinstance(data, dict) and "theta_deg" in data:
            data = dict(data)
            theta = data.pop("theta_deg")
            try:
                data["rotation"] = math.radians(float(theta))
            except (TypeError, ValueError):
                raise ValueError(f"theta_deg must be a number, got: {theta!r}")
        return data


_spec_list = TypeAdapter(List[EllipseSpec])


def shepp_logan_table(variant: SheppLoganVariant = "modified") -> List[EllipseSpec]:
    """
    Load the canonical 10-ellipse Shepp-Logan table shipped with the package.

    Args:
        variant: "modified" (high contrast) or "original" (1974 intensities)

    Returns:
        Ordered list of ellipses
    """
    raw = json.loads(resources.files("agtv_tomo").joinpath("data/shepp_logan.json").read_text())
    if variant not in raw["intensities"]:
        raise ValueError(f"Unknown Shepp-Logan variant: {variant}")

    intensities = raw["intensities"][variant]
    return [
        EllipseSpec(**geometry, intensity=value)
        for geometry, value in zip(raw["geometry"], intensities)
    ]


def load_phantom_spec(path: Path) -> List[EllipseSpec]:
    """
    Read a phantom description from a JSON file.

    The file holds a list of objects with keys center_x, center_y, a, b,
    theta_deg and intensity.
    """
    path = Path(path)
    if not path.exists():
        raise ValueError(f"Phantom spec not found: {path}")
    spec = _spec_list.validate_json(path.read_text())
    logger.info(f"Loaded {len(spec)} ellipses from {path}")
    return spec


def pixel_centers(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (x, y) coordinates of the pixel centres, each shaped (n, n)."""
    h = 2.0 / n
    coords = -1.0 + h * (np.arange(n) + 0.5)
    # rows run top to bottom, so y decreases with the row index
    return np.meshgrid(coords, coords[::-1])


def ellipse_phantom(spec: List[EllipseSpec], n: int) -> Image:
    """
    Rasterize an ellipse phantom by pixel-centre membership.

    Args:
        spec: Ordered ellipses; intensities add where they overlap
        n: Image side length

    Returns:
        n x n image
    """
    if n < 1:
        raise ValueError(f"Image side must be at least 1, got: {n}")
    if not spec:
        raise ValueError("Phantom spec must contain at least one ellipse")

    x, y = pixel_centers(n)
    image = np.zeros((n, n))
    for ellipse in spec:
        cos_t = math.cos(ellipse.rotation)
        sin_t = math.sin(ellipse.rotation)
        dx = x - ellipse.center_x
        dy = y - ellipse.center_y
        u = dx * cos_t + dy * sin_t
        v = -dx * sin_t + dy * cos_t
        inside = (u / ellipse.semi_axis_a) ** 2 + (v / ellipse.semi_axis_b) ** 2 <= 1.0
        image[inside] += ellipse.additive_intensity

    return image


def shepp_logan(n: int, variant: SheppLoganVariant = "modified") -> Image:
    """Rasterize the Shepp-Logan phantom at n x n."""
    if n < 1:
        raise ValueError(f"Image side must be at least 1, got: {n}")
    return ellipse_phantom(shepp_logan_table(variant), n)
