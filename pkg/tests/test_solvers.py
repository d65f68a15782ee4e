"""Tests for the reconstruction solvers"""

import dataclasses
import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import sparse

from agtv_tomo.errors import NumericalError
from agtv_tomo.graph import graph_tv, grid_graph, operator_norm, patch_graph
from agtv_tomo.projector import project
from agtv_tomo.solvers import (
    ReconResult,
    SolverConfig,
    agtv,
    art_solve,
    cs_solve,
    cstv_solve,
    estimate_beta,
    grad_f,
    gtv_solve,
    objective,
    prox_l1,
    reconstruct,
    resolve_steps,
    sirt_solve,
    solver_config,
)
from agtv_tomo.solvers.base import initial_image, relative_change
from agtv_tomo.solvers.primal_dual import dual_prox


@pytest.fixture
def random_system(rng):
    """Overdetermined random system over a 4x4 image."""
    return sparse.csr_matrix(rng.standard_normal((40, 16)))


@pytest.fixture
def sino16(system16, phantom16):
    return project(system16, phantom16)


def test_grad_f_matches_finite_differences(random_system, rng):
    x = rng.standard_normal((4, 4))
    b = rng.standard_normal(40)

    def f(v):
        r = random_system @ v.ravel() - b
        return float(r @ r)

    g = grad_f(random_system, x, b)
    assert g.shape == (4, 4)
    h = 1e-6
    for idx in [(0, 0), (1, 3), (3, 2)]:
        e = np.zeros_like(x)
        e[idx] = h
        numeric = (f(x + e) - f(x - e)) / (2 * h)
        assert g[idx] == pytest.approx(numeric, rel=1e-5)


def test_prox_l1():
    v = np.array([-3.0, -0.5, 0.0, 0.5, 3.0])
    assert np.allclose(prox_l1(v, 1.0), [-2.0, 0.0, 0.0, 0.0, 2.0])
    assert np.array_equal(prox_l1(v, 0.0), v)
    with pytest.raises(ValueError):
        prox_l1(v, -1.0)


def test_beta_of_scaled_identity():
    A = 2.0 * sparse.identity(16, format="csr")
    estimate = estimate_beta(A)
    assert estimate.spectral_norm_A == pytest.approx(2.0)
    assert estimate.beta == pytest.approx(8.0)
    assert estimate_beta(A, literal=True).beta == pytest.approx(4.0)


def test_beta_matches_dense_svd(random_system):
    sigma = np.linalg.svd(random_system.toarray(), compute_uv=False)[0]
    assert estimate_beta(random_system).beta == pytest.approx(2.0 * sigma**2, rel=1e-4)


def test_beta_of_zero_matrix_rejected():
    with pytest.raises(ValueError):
        estimate_beta(sparse.csr_matrix((4, 16)))



def test_beta_bounds_gradient_differences(system16, sino16, rng):
    """grad f is beta-Lipschitz on random pairs, and beta is within the Frobenius bound."""
    beta = estimate_beta(system16).beta
    for _ in range(20):
        x, y = rng.standard_normal((2, 16, 16))
        spread = np.linalg.norm(grad_f(system16, x, sino16) - grad_f(system16, y, sino16))
        assert spread <= beta * np.linalg.norm(x - y) * (1.0 + 1e-6)
    assert beta <= 2.0 * float(np.sum(system16.matrix.data**2))


def test_resolve_steps():
    steps = resolve_steps(SolverConfig(), beta=8.0, graph_norm=2.0)
    assert steps.tau1 == pytest.approx(0.125)
    assert steps.tau2 == pytest.approx(0.5)
    assert steps.tau3 == 1.0
    # step condition tau1 * (beta/2 + tau2 ||grad||^2) <= 1
    assert steps.tau1 * (4.0 + steps.tau2 * 4.0) <= 1.0

    assert resolve_steps(SolverConfig(), beta=8.0, graph_norm=0.0).tau2 == 1.0
    fixed = resolve_steps(SolverConfig(tau1=0.01, tau2=3.0, tau3=0.5), beta=8.0, graph_norm=2.0)
    assert (fixed.tau1, fixed.tau2, fixed.tau3) == (0.01, 3.0, 0.5)


def test_dual_prox_is_clipping(rng):
    T = 3.0 * rng.standard_normal(50)
    assert np.allclose(dual_prox(T, 0.7, 1.2), np.clip(T, -1.2, 1.2))


def test_identity_system_recovers_data():
    """With A = I and no regularization one step lands on b, the next one stops."""
    A = sparse.identity(64, format="csr")
    b = np.arange(64.0) / 64.0
    cfg = SolverConfig(lam=0.0, gamma=0.0, inner_iters=10)
    result = gtv_solve(A, b, grid_graph(8), cfg)
    assert np.allclose(result.image.ravel(), b)
    assert result.inner_iterations_used == [2]
    assert result.outer_iterations_used == 1


def test_graph_tv_denoising_lowers_objective(rng):
    clean = np.zeros((8, 8))
    clean[:, 4:] = 1.0
    noisy = clean + 0.1 * rng.standard_normal((8, 8))
    A = sparse.identity(64, format="csr")
    G = grid_graph(8)
    cfg = SolverConfig(lam=0.0, gamma=0.1, inner_iters=300, epsilon=1e-12)

    result = gtv_solve(A, noisy.ravel(), G, cfg, x0=noisy)
    assert objective(A, noisy.ravel(), result.image, 0.0, 0.1, G) < objective(
        A, noisy.ravel(), noisy, 0.0, 0.1, G
    )
    assert graph_tv(G, result.image) < graph_tv(G, noisy)
    assert np.linalg.norm(result.image - clean) < np.linalg.norm(noisy - clean)


def test_zero_gamma_reduces_to_cs(system16, sino16):
    cfg = SolverConfig(lam=0.2, gamma=0.0, inner_iters=25, epsilon=1e-30)
    via_graph = gtv_solve(system16, sino16, grid_graph(16), cfg)
    plain = cs_solve(system16, sino16, cfg)
    assert np.max(np.abs(via_graph.image - plain.image)) < 1e-10
    assert np.allclose(via_graph.residual_v_trace, 0.0)


def test_single_pass_agtv_is_gtv_on_fbp_graph(system16, sino16):
    cfg = SolverConfig(lam=0.1, gamma=0.2, inner_iters=10, outer_iters=1, k=5, knn_exact=True)
    adaptive = agtv(system16, sino16, cfg)

    x0 = initial_image(system16, sino16, cfg)
    G = patch_graph(x0, 3, 5, exact=True)
    fixed = gtv_solve(system16, sino16, G, cfg, x0=x0)

    assert np.allclose(adaptive.image, fixed.image)
    assert adaptive.graph.edge_count == G.edge_count
    assert adaptive.outer_iterations_used == 1


def test_cstv_uses_the_pixel_grid(system16, sino16):
    cfg = SolverConfig(lam=0.1, gamma=0.1, inner_iters=10)
    result = cstv_solve(system16, sino16, cfg)
    reference = gtv_solve(system16, sino16, grid_graph(16), cfg)
    assert result.method == "cstv"
    assert np.array_equal(result.image, reference.image)


def test_agtv_outer_loop(system16, sino16):
    base = dict(lam=0.1, gamma=0.2, inner_iters=5, k=5)

    stopped = agtv(system16, sino16, SolverConfig(**base, outer_iters=3, outer_epsilon=1e9))
    assert stopped.outer_iterations_used == 1

    full = agtv(system16, sino16, SolverConfig(**base, outer_iters=3, outer_epsilon=1e-30))
    assert full.outer_iterations_used == 3
    assert len(full.outer_residual_trace) == 3
    assert len(full.inner_iterations_used) == 3
    assert len(full.objective_trace) == sum(full.inner_iterations_used)
    assert np.all(np.diff(full.elapsed_ms_trace) >= 0.0)


def test_cstv_recovers_a_constant_image(system16):
    truth = np.full((16, 16), 0.5)
    cfg = SolverConfig(lam=0.01, gamma=0.05, inner_iters=1000, epsilon=1e-12)
    result = cstv_solve(system16, project(system16, truth), cfg)
    assert np.linalg.norm(result.image - truth) / np.linalg.norm(truth) < 2e-2


def test_agtv_warns_once_about_the_graph_norm(system16, sino16, monkeypatch, caplog):
    """A graph norm estimate that hits its cap is reported once per AGTV run, not per pass."""

    def capped(*args, **kwargs):
        return dataclasses.replace(operator_norm(*args, **kwargs), converged=False)

    monkeypatch.setattr("agtv_tomo.solvers.primal_dual.operator_norm", capped)
    cfg = SolverConfig(lam=0.1, gamma=0.2, inner_iters=3, outer_iters=3, outer_epsilon=1e-30, k=5)
    with caplog.at_level(logging.WARNING):
        result = agtv(system16, sino16, cfg)

    assert result.outer_iterations_used == 3
    assert not result.graph_norm_converged
    warnings = [r for r in caplog.records if "Graph norm estimate" in r.getMessage()]
    assert len(warnings) == 1
    assert "3 of 3 passes" in warnings[0].getMessage()


def test_agtv_is_deterministic(system16, sino16):
    cfg = SolverConfig(lam=0.1, gamma=0.2, inner_iters=5, outer_iters=2, k=5, seed=4)
    assert np.array_equal(agtv(system16, sino16, cfg).image, agtv(system16, sino16, cfg).image)


def test_cs_objective_is_monotone(system16, sino16):
    result = cs_solve(system16, sino16, SolverConfig(lam=0.5, inner_iters=40, epsilon=1e-30))
    trace = np.array(result.objective_trace)
    assert len(trace) == 40
    assert np.all(np.diff(trace) <= 1e-9 * trace[:-1])
    assert result.residual_v_trace == [0.0] * 40


def test_art_solves_consistent_system(random_system, rng):
    x_true = rng.standard_normal(16)
    b = random_system @ x_true
    cfg = SolverConfig(eta=1.0, inner_iters=300)
    for mode in ("cyclic", "randomized"):
        result = art_solve(random_system, b, cfg, mode=mode)
        assert np.linalg.norm(result.image.ravel() - x_true) < 1e-4 * np.linalg.norm(x_true)


def test_art_single_row():
    A = sparse.csr_matrix(np.array([[1.0, 2.0, 0.0, 2.0]]))
    result = art_solve(A, np.array([2.0]), SolverConfig(eta=1.0, inner_iters=1))
    assert (A @ result.image.ravel())[0] == pytest.approx(2.0)
    assert np.allclose(result.image.ravel(), np.array([1.0, 2.0, 0.0, 2.0]) * 2.0 / 9.0)


def test_art_skips_zero_rows():
    A = sparse.csr_matrix(np.array([[0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]]))
    result = art_solve(A, np.array([5.0, 3.0]), SolverConfig(eta=1.0, inner_iters=2))
    assert result.image.ravel()[0] == pytest.approx(3.0)


def test_sirt_fixed_point(random_system, rng):
    x_true = rng.standard_normal((4, 4))
    b = random_system @ x_true.ravel()
    for mode in ("cimmino", "sart"):
        result = sirt_solve(random_system, b, SolverConfig(inner_iters=5), x0=x_true, mode=mode)
        assert np.allclose(result.image, x_true)


def test_cimmino_misfit_is_monotone(rng):
    M = rng.standard_normal((30, 16))
    M /= np.linalg.norm(M, axis=1, keepdims=True)
    A = sparse.csr_matrix(M)
    b = rng.standard_normal(30)
    result = sirt_solve(A, b, SolverConfig(eta=1.0, inner_iters=50), mode="cimmino")
    assert np.all(np.diff(result.objective_trace) <= 1e-12)


def test_unknown_modes_rejected(random_system):
    b = np.zeros(40)
    with pytest.raises(ValueError):
        art_solve(random_system, b, SolverConfig(), mode="diagonal")
    with pytest.raises(ValueError):
        sirt_solve(random_system, b, SolverConfig(), mode="landweber")


def test_huge_step_raises_numerical_error(system16, sino16):
    with pytest.raises(NumericalError):
        cs_solve(system16, sino16, SolverConfig(tau1=1e6, inner_iters=500, epsilon=1e-30))
    with pytest.raises(NumericalError):
        gtv_solve(
            system16,
            sino16,
            grid_graph(16),
            SolverConfig(tau1=1e6, inner_iters=500, epsilon=1e-30, log_objective=False),
        )


def test_size_checks(system16, sino16):
    with pytest.raises(ValueError):
        gtv_solve(system16, sino16, grid_graph(8), SolverConfig())
    with pytest.raises(ValueError):
        cs_solve(system16, sino16[:-1], SolverConfig())
    with pytest.raises(ValueError):
        cs_solve(sparse.csr_matrix(np.ones((3, 5))), np.ones(3), SolverConfig())


def test_solver_config():
    cfg = solver_config("agtv", {"lambda": 0.1, "k": None})
    assert cfg.lam == 0.1
    assert cfg.k == 15
    assert cfg.outer_iters == 30
    assert solver_config("cstv").gamma == 0.1
    assert SolverConfig(**{"lambda": 0.3}).lam == 0.3
    with pytest.raises(ValidationError):
        SolverConfig(patch_side=4)
    with pytest.raises(ValueError):
        solver_config("tikhonov")


def test_reconstruct_dispatch(system16, sino16):
    fbp = reconstruct("fbp", system16, sino16)
    assert fbp.method == "fbp"
    assert len(fbp.trace_rows()) == 1

    gtv = reconstruct("gtv", system16, sino16, solver_config("gtv", {"inner_iters": 3, "k": 5}))
    assert gtv.method == "gtv"
    assert gtv.outer_iterations_used == 1

    for method in ("art", "sirt", "cs", "cstv"):
        result = reconstruct(method, system16, sino16, solver_config(method, {"inner_iters": 3}))
        assert result.image.shape == (16, 16)
        assert np.all(np.isfinite(result.image))

    with pytest.raises(ValueError):
        reconstruct("fbp", system16.matrix, sino16)
    with pytest.raises(ValueError):
        reconstruct("mlem", system16, sino16)


def test_trace_rows_are_numbered():
    result = ReconResult(image=np.zeros((2, 2)))
    result.record(3.0, 0.5, 0.25, 0.0)
    result.record(2.0, 0.1, 0.05, 0.0)
    rows = result.trace_rows()
    assert [row[0] for row in rows] == [1, 2]
    assert rows[1][1:4] == (2.0, 0.1, 0.05)


def test_relative_change_guard():
    zero = np.zeros(3)
    assert relative_change(zero, zero, 1e-10) == 0.0
    assert relative_change(np.ones(3), zero, 1.0) == pytest.approx(3.0)
    assert math.isfinite(relative_change(np.ones(3), zero, 1e-10))
