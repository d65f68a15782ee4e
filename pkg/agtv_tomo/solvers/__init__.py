"""Reconstruction solvers"""

from agtv_tomo.solvers.algebraic import art_solve, sirt_solve
from agtv_tomo.solvers.base import (
    LipschitzEstimate,
    ReconResult,
    SolverConfig,
    StepSizes,
    estimate_beta,
    grad_f,
    objective,
    prox_l1,
)
from agtv_tomo.solvers.methods import METHOD_DEFAULTS, METHODS, reconstruct, solver_config
from agtv_tomo.solvers.primal_dual import agtv, cstv_solve, gtv_solve, resolve_steps
from agtv_tomo.solvers.sparse import cs_solve

__all__ = [
    "LipschitzEstimate",
    "METHOD_DEFAULTS",
    "METHODS",
    "ReconResult",
    "SolverConfig",
    "StepSizes",
    "agtv",
    "art_solve",
    "cs_solve",
    "cstv_solve",
    "estimate_beta",
    "grad_f",
    "gtv_solve",
    "objective",
    "prox_l1",
    "reconstruct",
    "resolve_steps",
    "sirt_solve",
    "solver_config",
]
