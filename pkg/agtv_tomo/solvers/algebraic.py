"""Algebraic reconstruction baselines: Kaczmarz (ART) and simultaneous (SIRT) iterations"""

import logging
import time
from typing import Literal, Optional

import numpy as np

from agtv_tomo.phantom import Image
from agtv_tomo.solvers.base import (
    ReconResult,
    SolverConfig,
    SystemMatrix,
    as_matrix,
    check_finite,
    data_vector,
    image_side,
    initial_image,
    relative_change,
)

logger = logging.getLogger(__name__)


def _safe_inverse(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values, dtype=np.float64)
    nonzero = values != 0.0
    out[nonzero] = 1.0 / values[nonzero]
    return out


def _misfit(M, x: np.ndarray, b: np.ndarray) -> float:
    r = M @ x - b
    return float(np.dot(r, r))


def art_solve(
    A: SystemMatrix,
    b: np.ndarray,
    cfg: SolverConfig,
    x0: Optional[Image] = None,
    mode: Optional[Literal["cyclic", "randomized"]] = None,
) -> ReconResult:
    """
    Kaczmarz sweeps x <- x + eta (b_i - <a_i, x>) / ||a_i||^2 a_i.

    A sweep visits every non-zero row once (cyclic) or draws as many rows
    uniformly at random with replacement (randomized). Zero rows are skipped.

    Args:
        A: System matrix
        b: Measured data
        cfg: ``inner_iters`` sweeps with relaxation ``eta``
        x0: Initial image (defaults to the FBP of b)
        mode: Row order; defaults to ``cfg.art_mode``

    Returns:
        ReconResult; the objective trace is ||A x - b||^2 after each sweep
    """
    mode = mode or cfg.art_mode
    if mode not in ("cyclic", "randomized"):
        raise ValueError(f"Unknown ART mode: {mode}")

    started = time.perf_counter()
    M = as_matrix(A)
    b = data_vector(A, b)
    n = image_side(A)
    x = initial_image(A, b, cfg, x0).ravel().copy()

    indptr, indices, data = M.indptr, M.indices, M.data
    row_norms = np.asarray(M.multiply(M).sum(axis=1)).ravel()
    active = np.flatnonzero(row_norms > 0.0)
    rng = np.random.default_rng(cfg.seed)

    result = ReconResult(image=x.reshape(n, n), method="art")
    for sweep in range(1, cfg.inner_iters + 1):
        if mode == "cyclic":
            order = active
        else:
            order = active[rng.integers(0, active.size, size=active.size)]
        previous = x.copy()
        for i in order.tolist():
            lo, hi = indptr[i], indptr[i + 1]
            cols, vals = indices[lo:hi], data[lo:hi]
            step = cfg.eta * (b[i] - np.dot(vals, x[cols])) / row_norms[i]
            x[cols] += step * vals
        check_finite("ART", sweep, None, x)

        result.record(_misfit(M, x, b), relative_change(x, previous, cfg.delta), 0.0, started)

    logger.info(f"ART ({mode}) finished {cfg.inner_iters} sweeps")
    result.image = x.reshape(n, n)
    result.inner_iterations_used = [cfg.inner_iters]
    result.outer_iterations_used = 1
    result.wall_time = time.perf_counter() - started
    return result


def sirt_solve(
    A: SystemMatrix,
    b: np.ndarray,
    cfg: SolverConfig,
    x0: Optional[Image] = None,
    mode: Optional[Literal["cimmino", "sart"]] = None,
) -> ReconResult:
    """
    Simultaneous iterations x <- x + eta C A^T R (b - A x).

    Cimmino: R = diag(1 / (m ||a_i||^2)), C = I.
    SART: R = diag(1 / row sums), C = diag(1 / column sums).
    Zero sums get a zero scaling, so the matching rows or pixels are left alone.
    """
    mode = mode or cfg.sirt_mode
    if mode not in ("cimmino", "sart"):
        raise ValueError(f"Unknown SIRT mode: {mode}")

    started = time.perf_counter()
    M = as_matrix(A)
    b = data_vector(A, b)
    n = image_side(A)
    x = initial_image(A, b, cfg, x0).ravel().copy()

    if mode == "cimmino":
        R = _safe_inverse(M.shape[0] * np.asarray(M.multiply(M).sum(axis=1)).ravel())
        C = np.ones(M.shape[1])
    else:
        magnitudes = abs(M)
        R = _safe_inverse(np.asarray(magnitudes.sum(axis=1)).ravel())
        C = _safe_inverse(np.asarray(magnitudes.sum(axis=0)).ravel())
    MT = M.T.tocsr()

    result = ReconResult(image=x.reshape(n, n), method="sirt")
    for it in range(1, cfg.inner_iters + 1):
        x_next = x + cfg.eta * C * (MT @ (R * (b - M @ x)))
        check_finite("SIRT", it, None, x_next)
        residual = relative_change(x_next, x, cfg.delta)
        x = x_next
        result.record(_misfit(M, x, b), residual, 0.0, started)

    logger.info(f"SIRT ({mode}) finished {cfg.inner_iters} iterations")
    result.image = x.reshape(n, n)
    result.inner_iterations_used = [cfg.inner_iters]
    result.outer_iterations_used = 1
    result.wall_time = time.perf_counter() - started
    return result
