"""Shared fixtures for agtv-tomo tests"""

import numpy as np
import pytest

from agtv_tomo.phantom import shepp_logan
from agtv_tomo.projector import build_system_matrix, equispaced_angles


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    """Keep run outputs and log files inside the test's temporary directory."""
    monkeypatch.setenv("AGTV_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("AGTV_LOG_FILE", "")
    monkeypatch.setenv("AGTV_LOG_LEVEL", "INFO")
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def phantom16():
    return shepp_logan(16)


@pytest.fixture(scope="session")
def phantom32():
    return shepp_logan(32)


@pytest.fixture(scope="session")
def system16():
    """16x16 image, 18 views over 180 degrees."""
    return build_system_matrix(16, equispaced_angles(18))


@pytest.fixture(scope="session")
def system32():
    """32x32 image, 36 views over 180 degrees."""
    return build_system_matrix(32, equispaced_angles(36))


def disk(n: int, radius: float) -> np.ndarray:
    """Centred disk of unit density on the [-1, 1]^2 grid."""
    coords = -1.0 + (2.0 / n) * (np.arange(n) + 0.5)
    x, y = np.meshgrid(coords, coords[::-1])
    return (x**2 + y**2 <= radius**2).astype(np.float64)
