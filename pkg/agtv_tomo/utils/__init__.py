"""Utilities package for agtv-tomo"""

from agtv_tomo.utils.linalg import PowerIterationResult, power_iteration
from agtv_tomo.utils.logging import setup_logging

__all__ = ["PowerIterationResult", "power_iteration", "setup_logging"]
