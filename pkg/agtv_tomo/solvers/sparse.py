"""Wavelet-sparsity (CS) reconstruction by proximal gradient descent"""

import logging
import time
from typing import Optional

import numpy as np

from agtv_tomo.phantom import Image
from agtv_tomo.solvers.base import (
    ReconResult,
    SolverConfig,
    StepSizes,
    SystemMatrix,
    check_finite,
    data_vector,
    estimate_beta,
    grad_f,
    initial_image,
    objective,
    prox_l1,
    relative_change,
)
from agtv_tomo.wavelet import WaveletCoeffs, analyze, synthesize

logger = logging.getLogger(__name__)


def cs_solve(
    A: SystemMatrix,
    b: np.ndarray,
    cfg: SolverConfig,
    x0: Optional[Image] = None,
) -> ReconResult:
    """
    Minimize ||A x - b||^2 + lam ||Phi^* x||_1 with x <- Phi(soft(Phi^*(x - tau1 grad f(x)), tau1 lam)).

    Runs ``cfg.inner_iters`` iterations unless the relative change of x drops
    below epsilon first.
    """
    started = time.perf_counter()
    b = data_vector(A, b)
    x = initial_image(A, b, cfg, x0)
    levels = cfg.wavelet_levels

    lipschitz = estimate_beta(A, cfg.power_iters, cfg.power_tol, cfg.literal_beta, cfg.seed)
    tau1 = cfg.tau1 if cfg.tau1 is not None else 1.0 / lipschitz.beta
    steps = StepSizes(tau1=tau1, tau2=0.0, tau3=1.0)

    result = ReconResult(image=x, method="cs", steps=steps)
    used = 0
    for j in range(1, cfg.inner_iters + 1):
        coeffs = analyze(x - tau1 * grad_f(A, x, b), levels)
        x_next = synthesize(
            WaveletCoeffs(n=coeffs.n, levels=coeffs.levels, data=prox_l1(coeffs.data, tau1 * cfg.lam))
        )
        check_finite("CS", j, steps, x_next)

        residual = relative_change(x_next, x, cfg.delta)
        x = x_next
        used = j
        value = objective(A, b, x, cfg.lam, levels=levels) if cfg.log_objective else float("nan")
        result.record(value, residual, 0.0, started)
        if residual < cfg.epsilon:
            break

    logger.info(f"CS finished after {used} iterations")
    result.image = x
    result.inner_iterations_used = [used]
    result.outer_iterations_used = 1
    result.wall_time = time.perf_counter() - started
    return result
