"""Method registry: tuned defaults and a single reconstruction entry point"""

import logging
import time
from typing import Any, Dict, Literal, Mapping, Optional, get_args

import numpy as np

from agtv_tomo.fbp import FbpConfig, fbp_reconstruct
from agtv_tomo.phantom import Image
from agtv_tomo.projector import ProjectionMatrix
from agtv_tomo.solvers.algebraic import art_solve, sirt_solve
from agtv_tomo.solvers.base import ReconResult, SolverConfig, SystemMatrix, as_matrix, data_vector
from agtv_tomo.solvers.primal_dual import agtv, cstv_solve
from agtv_tomo.solvers.sparse import cs_solve

logger = logging.getLogger(__name__)

Method = Literal["fbp", "art", "sirt", "cs", "cstv", "gtv", "agtv"]
METHODS = get_args(Method)

# Shepp-Logan 64x64, 36 views, 10% Poisson noise settings
METHOD_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "fbp": {"fbp_crop": 0.8},
    "art": {"eta": 0.25, "inner_iters": 100},
    "sirt": {"eta": 0.25, "inner_iters": 100},
    "cs": {"lam": 0.5, "inner_iters": 500},
    "cstv": {"lam": 0.5, "gamma": 0.1, "inner_iters": 100, "outer_iters": 1},
    "gtv": {"lam": 0.5, "gamma": 0.2, "inner_iters": 100, "outer_iters": 1, "k": 15, "patch_side": 3},
    "agtv": {"lam": 0.5, "gamma": 1.0, "inner_iters": 30, "outer_iters": 30, "k": 15, "patch_side": 3},
}


def check_method(method: str) -> str:
    if method not in METHODS:
        raise ValueError(f"Unknown method '{method}'. Choose one of: {', '.join(METHODS)}")
    return method


def solver_config(method: str, overrides: Optional[Mapping[str, Any]] = None) -> SolverConfig:
    """
    Build a SolverConfig from the method defaults updated by ``overrides``.

    Args:
        method: Reconstruction method
        overrides: Field values (``lambda`` accepted for ``lam``); None values are ignored

    Returns:
        Validated SolverConfig
    """
    values = dict(METHOD_DEFAULTS[check_method(method)])
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        values["lam" if key == "lambda" else key] = value
    return SolverConfig(**values)


def reconstruct(
    method: str,
    A: SystemMatrix,
    b: np.ndarray,
    cfg: Optional[SolverConfig] = None,
    x0: Optional[Image] = None,
) -> ReconResult:
    """
    Reconstruct an image with any supported method.

    Args:
        method: One of fbp, art, sirt, cs, cstv, gtv, agtv
        A: System matrix
        b: Measured data
        cfg: Solver parameters (defaults to the method's tuned values)
        x0: Initial image for iterative methods (defaults to the FBP of b)

    Returns:
        ReconResult
    """
    check_method(method)
    cfg = cfg or solver_config(method)
    logger.info(f"Reconstructing with {method}")

    if method == "fbp":
        if not isinstance(A, ProjectionMatrix):
            raise ValueError("FBP needs a ProjectionMatrix with its acquisition geometry")
        started = time.perf_counter()
        b = data_vector(A, b)
        image = fbp_reconstruct(
            b.reshape(A.q, A.p), A.angles, A.n, FbpConfig(crop_fraction=cfg.fbp_crop), A.spacing
        )
        result = ReconResult(image=image, method="fbp")
        residual = as_matrix(A) @ image.ravel() - b
        result.record(float(np.dot(residual, residual)), 0.0, 0.0, started)
        result.outer_iterations_used = 1
        result.inner_iterations_used = [1]
        result.wall_time = time.perf_counter() - started
        return result
    if method == "art":
        return art_solve(A, b, cfg, x0)
    if method == "sirt":
        return sirt_solve(A, b, cfg, x0)
    if method == "cs":
        return cs_solve(A, b, cfg, x0)
    if method == "cstv":
        return cstv_solve(A, b, cfg, x0)
    if method == "gtv":
        result = agtv(A, b, cfg.model_copy(update={"outer_iters": 1}), x0)
        result.method = "gtv"
        return result
    return agtv(A, b, cfg, x0)
