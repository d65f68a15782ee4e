"""Storage base interface for agtv-tomo"""

from abc import ABC, abstractmethod
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from agtv_tomo.graph import PatchGraph
from agtv_tomo.projector import ProjectionMatrix


class StorageBackend(ABC):
    """Abstract storage backend for the artifacts of one run."""

    @abstractmethod
    def save_image(self, name: str, img: np.ndarray) -> None:
        """Store an n x n image."""
        pass

    @abstractmethod
    def load_image(self, name: str) -> np.ndarray:
        """Load an n x n image."""
        pass

    @abstractmethod
    def save_sinogram(self, name: str, sino: np.ndarray) -> None:
        """Store a (q, p) sinogram."""
        pass

    @abstractmethod
    def load_sinogram(self, name: str) -> np.ndarray:
        """Load a (q, p) sinogram."""
        pass

    @abstractmethod
    def save_preview(self, name: str, img: np.ndarray) -> None:
        """Store a greyscale preview of an image."""
        pass

    @abstractmethod
    def save_system(self, A: ProjectionMatrix) -> None:
        """Store the system matrix with its geometry."""
        pass

    @abstractmethod
    def load_system(self) -> Optional[ProjectionMatrix]:
        """Load the stored system matrix, if any."""
        pass

    @abstractmethod
    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
        """Replace a CSV table."""
        pass

    @abstractmethod
    def append_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
        """Append rows to a CSV table, creating it with ``header`` if needed."""
        pass

    @abstractmethod
    def read_csv(self, name: str) -> List[Dict[str, str]]:
        """Read a CSV table as dictionaries (empty when missing)."""
        pass

    @abstractmethod
    def write_manifest(self, values: Mapping[str, object]) -> None:
        """Store the flat key=value manifest of the run."""
        pass

    @abstractmethod
    def read_manifest(self) -> Dict[str, str]:
        """Load the run manifest (empty when missing)."""
        pass

    @abstractmethod
    def save_graph(self, G: PatchGraph) -> None:
        """Store a patch graph as a text edge list."""
        pass
