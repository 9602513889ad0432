"""Saddle dynamics: orthonormalization, stepping, convergence, index."""
import numpy as np
import pytest

from fraclandscape.errors import CapacityError, ContractError, DegeneracyError
from fraclandscape.fracop import ConstantOrder
from fraclandscape.grid import GridSpec, RealField, grid_inner, norm
from fraclandscape.phasefield import ModelParams, homogeneous_spectrum
from fraclandscape.saddle import (
    SaddleConfig,
    SaddleState,
    assemble_jacobian,
    compute_index,
    initial_directions,
    orthonormalize,
    run,
    stable_step_bound,
    step,
)


def _gram(V, g):
    k = V.shape[0]
    G = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            G[i, j] = grid_inner(g, V[i], V[j])
    return G


def test_config_validation():
    with pytest.raises(ContractError):
        SaddleConfig(k=-1)
    with pytest.raises(ContractError):
        SaddleConfig(k=25)  # above the default cap
    with pytest.raises(ContractError):
        SaddleConfig(k=1, tau=0.0)


def test_orthonormalize_identity_gram():
    g = GridSpec(1, 64)
    rng = np.random.default_rng(0)
    V = rng.standard_normal((5,) + g.shape)
    Q = orthonormalize(V, g)
    assert np.max(np.abs(_gram(Q, g) - np.eye(5))) < 1e-12


def test_orthonormalize_detects_dependence():
    g = GridSpec(1, 64)
    rng = np.random.default_rng(1)
    v = rng.standard_normal(g.shape)
    V = np.stack([v, 2.0 * v])
    with pytest.raises(DegeneracyError) as err:
        orthonormalize(V, g)
    assert err.value.column == 1


def test_initial_directions_soft_modes():
    g = GridSpec(1, 128)
    V = initial_directions(g, 3)
    assert np.max(np.abs(_gram(V, g) - np.eye(3))) < 1e-12
    # softest mode is the constant, then the k=+-1 pair
    assert np.ptp(V[0]) < 1e-12
    x = g.coords()
    for row in V[1:]:
        overlap = abs(grid_inner(g, row, np.sqrt(2) * np.cos(2 * np.pi * x))) + abs(
            grid_inner(g, row, np.sqrt(2) * np.sin(2 * np.pi * x))
        )
        assert overlap == pytest.approx(1.0, abs=1e-10)


def test_initial_directions_2d_count():
    g = GridSpec(2, 16)
    V = initial_directions(g, 5)
    assert V.shape == (5, 16, 16)
    assert np.max(np.abs(_gram(V, g) - np.eye(5))) < 1e-10


def test_step_keeps_directions_orthonormal():
    g = GridSpec(1, 128)
    p = ModelParams(g, ConstantOrder(2.0), 0.02)
    c = SaddleConfig(k=2, tau=5e-4, sigma=5e-4)
    rng = np.random.default_rng(3)
    s = SaddleState(
        RealField(g, 0.1 * rng.standard_normal(g.shape)),
        initial_directions(g, 2),
    )
    for _ in range(50):
        s = step(s, p, c)
        G = _gram(s.directions, g)
        assert np.max(np.abs(G - np.eye(2))) < 1e-10
    assert s.iter == 50


def test_step_residual_is_prestep_force_norm():
    from fraclandscape.phasefield import rhs

    g = GridSpec(1, 64)
    p = ModelParams(g, ConstantOrder(2.0), 0.03)
    s = SaddleState(RealField.constant(g, 0.5), initial_directions(g, 1))
    out = step(s, p, SaddleConfig(k=1, tau=1e-4, sigma=1e-4))
    assert out.residual == pytest.approx(norm(rhs(s.u, p)), rel=1e-12)


def test_stable_step_bound_value():
    g = GridSpec(1, 128)
    p = ModelParams(g, ConstantOrder(2.0), 0.02)
    lam_max = 4 * np.pi**2 * 64**2
    assert stable_step_bound(p) == pytest.approx(1.8 / (0.02 * lam_max + 1.0), rel=1e-12)


def test_run_descent_to_minimum():
    # k=0 saddle dynamics is plain gradient descent; from a small constant
    # state it must settle on u = +1
    g = GridSpec(1, 64)
    p = ModelParams(g, ConstantOrder(2.0), 0.03)
    s0 = SaddleState(RealField.constant(g, 0.1), np.empty((0,) + g.shape))
    state, report = run(s0, p, SaddleConfig(k=0))
    assert report.converged
    assert report.final_residual <= 1e-8
    assert np.max(np.abs(state.u.values - 1.0)) < 1e-6


def test_run_stationary_start_converges_immediately():
    g = GridSpec(1, 64)
    p = ModelParams(g, ConstantOrder(2.0), 0.02)
    k = 3
    s0 = SaddleState(RealField.zeros(g), initial_directions(g, k))
    state, report = run(s0, p, SaddleConfig(k=k))
    assert report.converged
    assert report.final_residual == 0.0
    index, _ = compute_index(state.u, p)
    assert index == 3


def test_run_reports_exhaustion():
    g = GridSpec(1, 64)
    p = ModelParams(g, ConstantOrder(2.0), 0.02)
    x = g.coords()
    v = np.sqrt(2) * np.sin(2 * np.pi * x)
    s0 = SaddleState(
        RealField(g, 0.1 * v), (v / norm(RealField(g, v)))[None].copy()
    )
    state, report = run(s0, p, SaddleConfig(k=1, max_iters=50))
    assert not report.converged
    assert report.reason == "max_iters"
    assert report.iters <= 50


def test_run_trajectory_log(tmp_path):
    g = GridSpec(1, 64)
    p = ModelParams(g, ConstantOrder(2.0), 0.03)
    s0 = SaddleState(RealField.constant(g, 0.1), np.empty((0,) + g.shape))
    log = tmp_path / "traj.csv"
    run(s0, p, SaddleConfig(k=0, max_iters=500), log_path=log, log_stride=100)
    lines = log.read_text().splitlines()
    assert lines[0] == "iter,residual,du_norm"
    assert len(lines) >= 3


def test_run_matches_step_for_one_iteration():
    # the optimized run loop and the reference step() must agree exactly on
    # a single unclamped iteration
    g = GridSpec(1, 64)
    p = ModelParams(g, ConstantOrder(2.0), 0.03)
    c = SaddleConfig(k=2, tau=1e-4, sigma=1e-4, max_iters=1)
    rng = np.random.default_rng(7)
    s0 = SaddleState(
        RealField(g, 0.2 * rng.standard_normal(g.shape)), initial_directions(g, 2)
    )
    ref = step(s0, p, c)
    state, report = run(s0, p, c)
    assert not report.converged
    assert np.max(np.abs(state.u.values - ref.u.values)) < 1e-13
    assert np.max(np.abs(state.directions - ref.directions)) < 1e-12


def test_assemble_jacobian_matches_analytic_spectrum():
    g = GridSpec(1, 128)
    p = ModelParams(g, ConstantOrder(1.5), 0.02)
    J = assemble_jacobian(RealField.zeros(g), p)
    eigs = np.sort(np.linalg.eigvalsh(0.5 * (J + J.T)))[::-1]
    ref = homogeneous_spectrum(p, 0.0)
    assert np.max(np.abs(eigs - ref)) < 1e-5


def test_compute_index_homogeneous_cases():
    g = GridSpec(1, 128)
    p = ModelParams(g, ConstantOrder(2.0), 0.02)
    idx0, spec0 = compute_index(RealField.zeros(g), p)
    assert idx0 == 3
    idx1, _ = compute_index(RealField.constant(g, 1.0), p)
    assert idx1 == 0
    assert spec0[0] == pytest.approx(1.0, abs=1e-5)


def test_capacity_cap_enforced():
    g = GridSpec(2, 128)  # 16384 unknowns > dense cap
    p = ModelParams(g, ConstantOrder(2.0), 0.02)
    with pytest.raises(CapacityError):
        assemble_jacobian(RealField.zeros(g), p)


def test_state_direction_shape_check():
    g = GridSpec(1, 64)
    with pytest.raises(ContractError):
        SaddleState(RealField.zeros(g), np.zeros((1, 32)))
