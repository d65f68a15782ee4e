"""Experiment tools for agtv-tomo"""

from agtv_tomo.tools.experiments import (
    run_compare,
    run_phantom,
    run_project,
    run_reconstruct,
    run_sweep,
)
from agtv_tomo.tools.models import CompareConfig, RunConfig, SweepConfig

__all__ = [
    "CompareConfig",
    "RunConfig",
    "SweepConfig",
    "run_compare",
    "run_phantom",
    "run_project",
    "run_reconstruct",
    "run_sweep",
]
