"""Forward-backward primal-dual solver for the graph-TV regularized problem

    min_x ||A x - b||^2 + lam ||Phi^* x||_1 + gamma ||grad_G x||_1

``gtv_solve`` runs the inner iterations for a fixed graph, ``agtv`` rebuilds
the patch graph from the current reconstruction between passes, and
``cstv_solve`` fixes the graph to the pixel grid (anisotropic TV).
"""

import logging
import time
from typing import Optional

import numpy as np

from agtv_tomo.graph import (
    PatchGraph,
    connected_components,
    divergence,
    gradient,
    grid_graph,
    operator_norm,
    patch_graph,
)
from agtv_tomo.phantom import Image
from agtv_tomo.solvers.base import (
    LipschitzEstimate,
    ReconResult,
    SolverConfig,
    StepSizes,
    SystemMatrix,
    check_finite,
    data_vector,
    estimate_beta,
    grad_f,
    image_side,
    initial_image,
    objective,
    prox_l1,
    relative_change,
)
from agtv_tomo.wavelet import WaveletCoeffs, analyze, synthesize

logger = logging.getLogger(__name__)


def resolve_steps(cfg: SolverConfig, beta: float, graph_norm: float) -> StepSizes:
    """
    Fill unset step sizes: tau1 = 1/beta, tau2 = 1/(4 tau1 ||grad_G||^2), tau3 = 1.

    These satisfy tau1 * (beta/2 + tau2 ||grad_G||^2) <= 1.
    """
    tau1 = cfg.tau1 if cfg.tau1 is not None else 1.0 / beta
    if cfg.tau2 is not None:
        tau2 = cfg.tau2
    elif graph_norm > 0.0:
        tau2 = 1.0 / (4.0 * tau1 * graph_norm**2)
    else:
        tau2 = 1.0
    tau3 = cfg.tau3 if cfg.tau3 is not None else 1.0
    return StepSizes(tau1=tau1, tau2=tau2, tau3=tau3)


def dual_prox(T: np.ndarray, tau2: float, gamma: float) -> np.ndarray:
    """Step c: Q = T - tau2 * prox_{h/tau2}(T / tau2) with h = gamma ||.||_1."""
    return T - tau2 * prox_l1(T / tau2, gamma / tau2)


def gtv_solve(
    A: SystemMatrix,
    b: np.ndarray,
    G: PatchGraph,
    cfg: SolverConfig,
    x0: Optional[Image] = None,
    lipschitz: Optional[LipschitzEstimate] = None,
    warn_unconverged: bool = True,
) -> ReconResult:
    """
    Inner primal-dual iterations on a fixed graph.

    Per iteration j:
        a. P = Phi(soft(Phi^*(U - tau1 (grad f(U) + grad_G^T V)), tau1 lam))
        b. T = V + tau2 grad_G(2P - U)
        c. Q = T - tau2 prox_{h/tau2}(T/tau2)
        d. U += tau3 (P - U), V += tau3 (Q - V)
    Stops once both relative changes fall below epsilon, or after J iterations.

    Args:
        A: System matrix
        b: Measured data (sinogram or flat vector)
        G: Graph over the n^2 pixels
        cfg: Solver parameters
        x0: Initial image (defaults to the FBP of b)
        lipschitz: Precomputed Lipschitz estimate of grad f
        warn_unconverged: Log a warning when the graph norm estimate hits its cap

    Returns:
        ReconResult with per-iteration traces
    """
    started = time.perf_counter()
    n = image_side(A)
    b = data_vector(A, b)
    if G.node_count != n * n:
        raise ValueError(f"Graph has {G.node_count} nodes but the image has {n * n} pixels")

    U = initial_image(A, b, cfg, x0)
    levels = cfg.wavelet_levels
    lipschitz = lipschitz or estimate_beta(
        A, cfg.power_iters, cfg.power_tol, cfg.literal_beta, cfg.seed
    )
    norm = operator_norm(G, cfg.power_iters, cfg.graph_norm_tol, cfg.seed)
    if not norm.converged and warn_unconverged:
        logger.warning(
            f"Graph norm estimate hit the cap of {cfg.power_iters} iterations; tau2 uses {norm.value:.6g}"
        )
    steps = resolve_steps(cfg, lipschitz.beta, norm.value)
    tau1, tau2, tau3 = steps.tau1, steps.tau2, steps.tau3

    # the dual variable starts from grad_G x0 mapped into the dual feasible set
    V = np.clip(gradient(G, U), -cfg.gamma, cfg.gamma)

    result = ReconResult(
        image=U, method="gtv", steps=steps, graph=G, graph_norm_converged=norm.converged
    )
    logger.debug(
        f"GTV: tau1={tau1:.4g}, tau2={tau2:.4g}, tau3={tau3:.4g}, |E|={G.edge_count}"
    )

    used = 0
    for j in range(1, cfg.inner_iters + 1):
        forward = U - tau1 * (grad_f(A, U, b) + divergence(G, V).reshape(n, n))
        coeffs = analyze(forward, levels)
        P = synthesize(
            WaveletCoeffs(n=coeffs.n, levels=coeffs.levels, data=prox_l1(coeffs.data, tau1 * cfg.lam))
        )
        T = V + tau2 * gradient(G, 2.0 * P - U)
        Q = dual_prox(T, tau2, cfg.gamma)

        if tau3 == 1.0:
            U_next, V_next = P, Q
        else:
            U_next = U + tau3 * (P - U)
            V_next = V + tau3 * (Q - V)
        check_finite("GTV", j, steps, U_next, V_next)

        residual_u = relative_change(U_next, U, cfg.delta)
        residual_v = relative_change(V_next, V, cfg.delta)
        U, V = U_next, V_next
        used = j

        value = (
            objective(A, b, U, cfg.lam, cfg.gamma, G, levels) if cfg.log_objective else float("nan")
        )
        result.record(value, residual_u, residual_v, started)
        logger.debug(
            f"GTV iteration {j}: objective={value:.6g}, dU={residual_u:.3e}, dV={residual_v:.3e}"
        )
        if residual_u < cfg.epsilon and residual_v < cfg.epsilon:
            break

    result.image = U
    result.inner_iterations_used = [used]
    result.outer_iterations_used = 1
    result.wall_time = time.perf_counter() - started
    return result


def agtv(
    A: SystemMatrix,
    b: np.ndarray,
    cfg: SolverConfig,
    x0: Optional[Image] = None,
) -> ReconResult:
    """
    Adaptive graph TV: alternate patch-graph construction and GTV passes.

    Pass i builds the graph from the patches of x_i, then runs ``gtv_solve``
    from x_i. The loop stops after I passes or once
    ||x_{i+1} - x_i||^2 / (||x_{i+1}||^2 + delta) drops below the outer tolerance.

    Args:
        A: System matrix
        b: Measured data
        cfg: Solver parameters (lam, gamma, K, patch side, I, J, ...)
        x0: Initial image (defaults to the FBP of b)

    Returns:
        ReconResult with the traces of every pass and the graph of the last one
    """
    started = time.perf_counter()
    b = data_vector(A, b)
    x = initial_image(A, b, cfg, x0)
    lipschitz = estimate_beta(A, cfg.power_iters, cfg.power_tol, cfg.literal_beta, cfg.seed)
    tolerance = cfg.outer_epsilon if cfg.outer_epsilon is not None else cfg.epsilon

    result = ReconResult(image=x, method="agtv")
    unconverged = 0
    for i in range(1, cfg.outer_iters + 1):
        pass_started = time.perf_counter()
        G = patch_graph(
            x, cfg.patch_side, cfg.k, exact=cfg.knn_exact, quality=cfg.knn_quality, seed=cfg.seed
        )
        components = connected_components(G)
        if components > 1:
            logger.info(f"Patch graph of pass {i} has {components} connected components")

        inner = gtv_solve(A, b, G, cfg, x0=x, lipschitz=lipschitz, warn_unconverged=False)
        if not inner.graph_norm_converged:
            unconverged += 1
        result.extend(inner, offset_ms=(pass_started - started) * 1000.0)
        result.steps, result.graph = inner.steps, G

        change = relative_change(x, inner.image, cfg.delta)
        result.outer_residual_trace.append(change)
        result.outer_iterations_used = i
        x = inner.image
        logger.info(
            f"AGTV pass {i}: {inner.inner_iterations_used[0]} inner iterations, "
            f"|E|={G.edge_count}, outer change={change:.3e}"
        )
        if change < tolerance:
            break

    if unconverged:
        logger.warning(
            f"Graph norm estimate hit the cap of {cfg.power_iters} iterations in "
            f"{unconverged} of {result.outer_iterations_used} passes"
        )
        result.graph_norm_converged = False
    result.image = x
    result.wall_time = time.perf_counter() - started
    return result


def cstv_solve(
    A: SystemMatrix,
    b: np.ndarray,
    cfg: SolverConfig,
    x0: Optional[Image] = None,
) -> ReconResult:
    """Wavelet sparsity plus anisotropic TV: ``gtv_solve`` on the 4-neighbour grid."""
    result = gtv_solve(A, b, grid_graph(image_side(A)), cfg, x0)
    result.method = "cstv"
    return result
