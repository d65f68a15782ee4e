"""Shared solver configuration, results and building blocks"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import sparse

from agtv_tomo.errors import NumericalError
from agtv_tomo.fbp import FbpConfig, fbp_reconstruct
from agtv_tomo.graph import PatchGraph, graph_tv
from agtv_tomo.phantom import Image
from agtv_tomo.projector import ProjectionMatrix
from agtv_tomo.utils.linalg import power_iteration
from agtv_tomo.wavelet import analyze

logger = logging.getLogger(__name__)

# a ProjectionMatrix carries the geometry needed for an FBP prior; a bare
# sparse matrix is accepted for synthetic systems
SystemMatrix = Union[ProjectionMatrix, sparse.spmatrix]


class SolverConfig(BaseModel):
    """Parameters of every reconstruction method."""

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    lam: float = Field(default=0.5, ge=0.0, alias="lambda", description="Wavelet sparsity weight")
    gamma: float = Field(default=1.0, ge=0.0, description="Graph TV weight")
    tau1: Optional[float] = Field(default=None, gt=0.0, description="Primal step; None derives 1/beta")
    tau2: Optional[float] = Field(default=None, gt=0.0, description="Dual step; None derives it from tau1")
    tau3: Optional[float] = Field(default=None, gt=0.0, description="Relaxation; None means 1")
    epsilon: float = Field(default=1e-4, gt=0.0, description="Relative-change stopping tolerance")
    outer_epsilon: Optional[float] = Field(
        default=None, gt=0.0, description="Outer stopping tolerance; None reuses epsilon"
    )
    delta: float = Field(default=1e-10, gt=0.0, description="Division guard of the stopping tests")
    inner_iters: int = Field(default=30, ge=1, description="J, or the iteration count of single-loop methods")
    outer_iters: int = Field(default=30, ge=1, description="I, graph rebuilds of AGTV")
    k: int = Field(default=15, ge=1, description="Neighbours per pixel")
    patch_side: int = Field(default=3, ge=1, description="Odd patch side l")
    knn_exact: bool = Field(default=False, description="Quadratic-scan neighbour search")
    knn_quality: Optional[int] = Field(default=32, description="Leaf probes; None or <= 0 is exhaustive")
    eta: float = Field(default=0.25, gt=0.0, lt=2.0, description="ART/SIRT relaxation")
    art_mode: Literal["cyclic", "randomized"] = Field(default="cyclic")
    sirt_mode: Literal["cimmino", "sart"] = Field(default="cimmino")
    wavelet_levels: Optional[int] = Field(default=None, ge=0)
    fbp_crop: float = Field(default=0.8, gt=0.0, le=1.0, description="FBP prior cut-off")
    seed: int = Field(default=0)
    literal_beta: bool = Field(default=False, description="Use beta = 2*sigma_max(A)")
    log_objective: bool = Field(default=True, description="Evaluate the objective every iteration")
    power_iters: int = Field(default=1000, ge=1)
    power_tol: float = Field(default=1e-8, gt=0.0)
    graph_norm_tol: float = Field(
        default=1e-6, gt=0.0, description="Power iteration tolerance of ||grad_G|| for the step sizes"
    )

    @field_validator("patch_side")
    @classmethod
    def _odd_patch(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"patch_side must be odd, got: {v}")
        return v


@dataclass(frozen=True)
class LipschitzEstimate:
    spectral_norm_A: float
    beta: float
    converged: bool = True


@dataclass(frozen=True)
class StepSizes:
    tau1: float
    tau2: float
    tau3: float


@dataclass
class ReconResult:
    """Reconstruction with its convergence traces (one entry per logged iteration)."""

    image: Image
    method: str = ""
    objective_trace: List[float] = field(default_factory=list)
    residual_u_trace: List[float] = field(default_factory=list)
    residual_v_trace: List[float] = field(default_factory=list)
    elapsed_ms_trace: List[float] = field(default_factory=list)
    outer_residual_trace: List[float] = field(default_factory=list)
    outer_iterations_used: int = 0
    inner_iterations_used: List[int] = field(default_factory=list)
    wall_time: float = 0.0
    steps: Optional[StepSizes] = None
    graph: Optional[PatchGraph] = None
    graph_norm_converged: bool = True

    def record(self, objective: float, residual_u: float, residual_v: float, started: float):
        self.objective_trace.append(objective)
        self.residual_u_trace.append(residual_u)
        self.residual_v_trace.append(residual_v)
        self.elapsed_ms_trace.append((time.perf_counter() - started) * 1000.0)

    def extend(self, other: "ReconResult", offset_ms: float = 0.0) -> None:
        """Append the traces of a later pass."""
        self.objective_trace.extend(other.objective_trace)
        self.residual_u_trace.extend(other.residual_u_trace)
        self.residual_v_trace.extend(other.residual_v_trace)
        self.elapsed_ms_trace.extend(t + offset_ms for t in other.elapsed_ms_trace)
        self.inner_iterations_used.extend(other.inner_iterations_used)

    def trace_rows(self) -> List[Tuple[int, float, float, float, float]]:
        """Rows of (iteration, objective, residual_U, residual_V, wall_time_ms)."""
        return [
            (i + 1, obj, ru, rv, ms)
            for i, (obj, ru, rv, ms) in enumerate(
                zip(
                    self.objective_trace,
                    self.residual_u_trace,
                    self.residual_v_trace,
                    self.elapsed_ms_trace,
                )
            )
        ]


def as_matrix(A: SystemMatrix) -> sparse.csr_matrix:
    if isinstance(A, ProjectionMatrix):
        return A.matrix
    if sparse.issparse(A):
        return sparse.csr_matrix(A)
    raise ValueError(f"Expected a ProjectionMatrix or a sparse matrix, got {type(A).__name__}")


def image_side(A: SystemMatrix) -> int:
    """Side n of the square image the columns of A describe."""
    if isinstance(A, ProjectionMatrix):
        return A.n
    cols = as_matrix(A).shape[1]
    n = math.isqrt(cols)
    if n * n != cols:
        raise ValueError(f"A has {cols} columns, which is not a square image")
    return n


def data_vector(A: SystemMatrix, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64).ravel()
    rows = as_matrix(A).shape[0]
    if b.size != rows:
        raise ValueError(f"Data has {b.size} values but A has {rows} rows")
    return b


def initial_image(
    A: SystemMatrix, b: np.ndarray, cfg: SolverConfig, x0: Optional[Image] = None
) -> Image:
    """x0 when given, else the FBP of b when A carries geometry, else zeros."""
    n = image_side(A)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.size != n * n:
            raise ValueError(f"x0 has {x0.size} pixels but A expects {n * n}")
        return x0.reshape(n, n).copy()
    if isinstance(A, ProjectionMatrix):
        sino = data_vector(A, b).reshape(A.q, A.p)
        return fbp_reconstruct(sino, A.angles, A.n, FbpConfig(crop_fraction=cfg.fbp_crop), A.spacing)
    return np.zeros((n, n))


def grad_f(A: SystemMatrix, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gradient 2 A^T (A x - b) of the data term, shaped like x."""
    M = as_matrix(A)
    x = np.asarray(x, dtype=np.float64)
    if x.size != M.shape[1]:
        raise ValueError(f"x has {x.size} entries but A has {M.shape[1]} columns")
    b = data_vector(A, b)
    return (2.0 * (M.T @ (M @ x.ravel() - b))).reshape(x.shape)


def prox_l1(v: np.ndarray, t: float) -> np.ndarray:
    """Soft-thresholding sign(v) * max(|v| - t, 0)."""
    if t < 0:
        raise ValueError(f"Threshold must be non-negative, got: {t}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def estimate_beta(
    A: SystemMatrix,
    iterations: int = 1000,
    tol: float = 1e-8,
    literal: bool = False,
    seed: int = 0,
) -> LipschitzEstimate:
    """
    Lipschitz constant of grad f by power iteration on A^T A.

    Args:
        A: System matrix
        iterations: Power iteration cap
        tol: Relative tolerance of the eigenvalue estimate
        literal: Return beta = 2*sigma_max(A) instead of 2*sigma_max(A)^2
        seed: Seed of the start vector

    Returns:
        LipschitzEstimate
    """
    M = as_matrix(A)
    if M.nnz == 0 or not np.any(M.data):
        raise ValueError("Cannot estimate the Lipschitz constant of a zero matrix")
    estimate = power_iteration(lambda v: M.T @ (M @ v), M.shape[1], iterations, tol, seed)
    sigma = math.sqrt(max(estimate.value, 0.0))
    beta = 2.0 * sigma if literal else 2.0 * sigma**2
    if not estimate.converged:
        logger.warning(f"Power iteration for sigma_max(A) hit its cap of {iterations}; beta={beta:.6g}")
    logger.debug(f"sigma_max(A)={sigma:.6g}, beta={beta:.6g}")
    return LipschitzEstimate(spectral_norm_A=sigma, beta=beta, converged=estimate.converged)


def objective(
    A: SystemMatrix,
    b: np.ndarray,
    x: Image,
    lam: float,
    gamma: float = 0.0,
    G: Optional[PatchGraph] = None,
    levels: Optional[int] = None,
) -> float:
    """||A x - b||^2 + lam ||Phi^* x||_1 + gamma ||grad_G x||_1."""
    M = as_matrix(A)
    x = np.asarray(x, dtype=np.float64)
    residual = M @ x.ravel() - data_vector(A, b)
    value = float(np.dot(residual, residual))
    if lam:
        value += lam * float(np.abs(analyze(x, levels).data).sum())
    if gamma and G is not None:
        value += gamma * graph_tv(G, x)
    return value


def relative_change(new: np.ndarray, old: np.ndarray, delta: float) -> float:
    """||new - old||^2 / (||old||^2 + delta)."""
    diff = new - old
    return float(np.vdot(diff, diff) / (np.vdot(old, old) + delta))


def check_finite(name: str, iteration: int, steps: Optional[StepSizes], *arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            detail = (
                f" (tau1={steps.tau1:.4g}, tau2={steps.tau2:.4g}, tau3={steps.tau3:.4g})" if steps else ""
            )
            logger.error(f"{name}: non-finite iterate at iteration {iteration}{detail}")
            raise NumericalError(
                f"{name} diverged at iteration {iteration}{detail}; reduce the step sizes"
            )
