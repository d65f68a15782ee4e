"""Storage package for agtv-tomo"""

from agtv_tomo.storage.base import StorageBackend
from agtv_tomo.storage.file import FileStorage

__all__ = ["StorageBackend", "FileStorage"]
