"""File storage backend for agtv-tomo"""

import csv
import io
import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence

import numpy as np
from scipy import sparse

from agtv_tomo.config import read_flat_config
from agtv_tomo.graph import PatchGraph, export_edge_list
from agtv_tomo.projector import ProjectionMatrix
from agtv_tomo.storage.base import StorageBackend
from agtv_tomo.storage.formats import (
    decode_image,
    decode_sinogram,
    encode_image,
    encode_pgm,
    encode_sinogram,
)

logger = logging.getLogger(__name__)

SYSTEM_FILE = "system.npz"
MANIFEST_FILE = "manifest.cfg"
GRAPH_FILE = "graph.txt"


class FileStorage(StorageBackend):
    """One directory per run with fixed file names; every write is atomic."""

    def __init__(self, run_dir: Path):
        """
        Initialize file storage.

        Args:
            run_dir: Directory holding the artifacts of the run
        """
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        logger.debug(f"File storage initialized at {self.run_dir}")

    def path(self, name: str) -> Path:
        return self.run_dir / name

    @contextmanager
    def _atomic(self, name: str) -> Iterator[Path]:
        """Yield a temporary path in the run directory, renamed over ``name`` on success."""
        fd, tmp = tempfile.mkstemp(dir=self.run_dir, prefix=f".{name}.", suffix=".tmp")
        os.close(fd)
        try:
            yield Path(tmp)
            os.replace(tmp, self.path(name))
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise

    def _write_bytes(self, name: str, data: bytes) -> None:
        with self._atomic(name) as tmp:
            tmp.write_bytes(data)
        logger.debug(f"Wrote {name} ({len(data)} bytes)")

    def _read_bytes(self, name: str) -> bytes:
        path = self.path(name)
        if not path.exists():
            raise ValueError(f"File not found: {path}")
        return path.read_bytes()

    def save_image(self, name: str, img: np.ndarray) -> None:
        self._write_bytes(name, encode_image(img))

    def load_image(self, name: str) -> np.ndarray:
        return decode_image(self._read_bytes(name))

    def save_sinogram(self, name: str, sino: np.ndarray) -> None:
        self._write_bytes(name, encode_sinogram(sino))

    def load_sinogram(self, name: str) -> np.ndarray:
        return decode_sinogram(self._read_bytes(name))

    def save_preview(self, name: str, img: np.ndarray) -> None:
        self._write_bytes(name, encode_pgm(img))

    def save_system(self, A: ProjectionMatrix) -> None:
        matrix = A.matrix.tocsr()
        buffer = io.BytesIO()
        np.savez(
            buffer,
            data=matrix.data,
            indices=matrix.indices,
            indptr=matrix.indptr,
            shape=np.array(matrix.shape),
            angles=A.angles,
            n=A.n,
            p=A.p,
            spacing=A.spacing,
        )
        self._write_bytes(SYSTEM_FILE, buffer.getvalue())

    def load_system(self) -> Optional[ProjectionMatrix]:
        path = self.path(SYSTEM_FILE)
        if not path.exists():
            return None
        with np.load(path, allow_pickle=False) as archive:
            matrix = sparse.csr_matrix(
                (archive["data"], archive["indices"], archive["indptr"]),
                shape=tuple(int(s) for s in archive["shape"]),
            )
            A = ProjectionMatrix(
                matrix=matrix,
                n=int(archive["n"]),
                p=int(archive["p"]),
                angles=np.asarray(archive["angles"], dtype=np.float64),
                spacing=float(archive["spacing"]),
            )
        logger.debug(f"Loaded system matrix {matrix.shape} from {path}")
        return A

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
        with self._atomic(name) as tmp:
            with open(tmp, "w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(header)
                writer.writerows(rows)
        logger.debug(f"Wrote {len(rows)} rows to {name}")

    def append_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
        """Append rows, writing the header first when the table is new."""
        path = self.path(name)
        new = not path.exists() or path.stat().st_size == 0
        with open(path, "a", newline="") as handle:
            writer = csv.writer(handle)
            if new:
                writer.writerow(header)
            writer.writerows(rows)

    def read_csv(self, name: str) -> List[Dict[str, str]]:
        path = self.path(name)
        if not path.exists():
            return []
        with open(path, newline="") as handle:
            return list(csv.DictReader(handle))

    def write_manifest(self, values: Mapping[str, object]) -> None:
        lines = [f"{key}={value}" for key, value in values.items() if value is not None]
        self._write_bytes(MANIFEST_FILE, ("\n".join(lines) + "\n").encode("utf-8"))

    def read_manifest(self) -> Dict[str, str]:
        path = self.path(MANIFEST_FILE)
        if not path.exists():
            return {}
        return read_flat_config(path)

    def save_graph(self, G: PatchGraph) -> None:
        with self._atomic(GRAPH_FILE) as tmp:
            export_edge_list(G, tmp)
        logger.info(f"Exported graph with {G.edge_count} edges to {self.path(GRAPH_FILE)}")
