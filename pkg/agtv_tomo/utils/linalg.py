"""Power iteration for the largest eigenvalue of a PSD operator"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerIterationResult:
    value: float  # largest eigenvalue estimate
    converged: bool
    iterations: int


def power_iteration(
    apply: Callable[[np.ndarray], np.ndarray],
    size: int,
    iterations: int = 1000,
    tol: float = 1e-10,
    seed: int = 0,
) -> PowerIterationResult:
    """
    Estimate the largest eigenvalue of a symmetric PSD operator.

    Args:
        apply: Matrix-free operator v -> M v
        size: Length of v
        iterations: Iteration cap
        tol: Relative change of the Rayleigh quotient that counts as converged
        seed: Seed of the random start vector

    Returns:
        PowerIterationResult; ``converged`` is False when the cap was reached, and
        callers decide whether that deserves a warning
    """
    if size < 1:
        return PowerIterationResult(value=0.0, converged=True, iterations=0)

    rng = np.random.default_rng(seed)
    v = rng.standard_normal(size)
    v /= np.linalg.norm(v)

    value = 0.0
    for it in range(1, iterations + 1):
        w = apply(v)
        estimate = float(np.dot(v, w))
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return PowerIterationResult(value=0.0, converged=True, iterations=it)
        v = w / norm_w
        if abs(estimate - value) <= tol * abs(estimate):
            return PowerIterationResult(value=estimate, converged=True, iterations=it)
        value = estimate

    logger.debug(f"Power iteration stopped at the cap of {iterations} iterations")
    return PowerIterationResult(value=value, converged=False, iterations=iterations)
