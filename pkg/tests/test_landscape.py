"""Canonicalization, graph assembly, sweeps and coefficient matching.

Full landscape builds are exercised by the acceptance suite; these tests
cover the fast combinatorial pieces plus one small end-to-end build.
"""
import json

import numpy as np
import pytest

from fraclandscape.errors import ContractError, UnsupportedModelError
from fraclandscape.fracop import ConstantOrder, VariableOrder, build_expansion
from fraclandscape.grid import GridSpec, RealField
from fraclandscape.landscape import (
    LandscapeGraph,
    LandscapeNode,
    SearchPlan,
    apply_transform,
    build_landscape,
    canonicalize,
    index_sweep,
    match_constant_order,
    match_variable_order,
    zero_state_node,
)
from fraclandscape.phasefield import ModelParams
from fraclandscape.saddle import SaddleConfig


def test_canonicalize_translation_orbit():
    g = GridSpec(1, 64)
    rng = np.random.default_rng(0)
    u = RealField(g, rng.standard_normal(g.shape))
    _, sig, _ = canonicalize(u, sign=False)
    shifted = RealField(g, np.roll(u.values, 7))
    _, sig_shifted, _ = canonicalize(shifted, sign=False)
    assert sig == sig_shifted


def test_canonicalize_sign_orbit():
    g = GridSpec(1, 64)
    rng = np.random.default_rng(1)
    u = RealField(g, rng.standard_normal(g.shape))
    _, sig_a, _ = canonicalize(u, sign=True)
    _, sig_b, _ = canonicalize(RealField(g, -u.values), sign=True)
    assert sig_a == sig_b
    _, sig_c, _ = canonicalize(RealField(g, -u.values), sign=False)
    assert sig_c != canonicalize(u, sign=False)[1]


def test_canonicalize_idempotent():
    g = GridSpec(2, 16)
    rng = np.random.default_rng(2)
    u = RealField(g, rng.standard_normal(g.shape))
    rep, sig, _ = canonicalize(u)
    rep2, sig2, transform = canonicalize(rep)
    assert sig2 == sig
    assert np.array_equal(rep2.values, rep.values)
    assert transform == (1, (0,) * g.dim)


def test_canonicalize_transform_maps_input_to_rep():
    g = GridSpec(1, 32)
    rng = np.random.default_rng(3)
    u = RealField(g, rng.standard_normal(g.shape))
    rep, _, transform = canonicalize(u)
    moved = apply_transform(u.values, transform)
    assert np.array_equal(moved, rep.values)


def test_constant_fields_are_their_own_canonical_form():
    g = GridSpec(1, 32)
    u = RealField.constant(g, 1.0)
    rep, _, transform = canonicalize(u, sign=True)
    assert np.array_equal(rep.values, u.values)
    assert transform[1] == (0,)


def test_graph_dedup_and_summary():
    g = GridSpec(1, 32)
    graph = LandscapeGraph()
    for idx, val in ((1, 0.5), (0, 1.0), (0, -1.0)):
        u = RealField.constant(g, val)
        _, sig, _ = canonicalize(u, sign=False)
        graph.add_node(LandscapeNode(sig, u, idx, 0.0, []))
    assert graph.summary() == {1: 1, 0: 2}
    graph.add_edge("a", "b", 1, 1, 0.1, "downward")
    graph.add_edge("a", "b", 1, 1, 0.1, "downward")  # duplicate ignored
    assert len(graph.edges) == 1


def test_graph_json_deterministic_and_well_formed(tmp_path):
    g = GridSpec(1, 16)
    graph = LandscapeGraph()
    for val, idx in ((1.0, 0), (0.0, 3)):
        u = RealField.constant(g, val)
        _, sig, _ = canonicalize(u, sign=False)
        graph.add_node(LandscapeNode(sig, u, idx, 0.0, [float(idx)]))
    doc = json.loads(graph.to_json())
    assert [n["index"] for n in doc["nodes"]] == [3, 0]
    assert graph.to_json() == graph.to_json()
    graph.save(tmp_path)
    assert (tmp_path / "graph.json").exists()
    for n in doc["nodes"]:
        assert (tmp_path / n["field_ref"]).exists()


def test_search_plan_validation():
    with pytest.raises(ContractError):
        SearchPlan(mode="sideways", target_indices=[0])
    with pytest.raises(ContractError):
        SearchPlan(mode="downward", target_indices=[0], epsilon=-1.0)


def test_zero_state_node_gradient_1d():
    p = ModelParams(GridSpec(1, 128), ConstantOrder(2.0), 0.02)
    node = zero_state_node(p)
    assert node.index == 3
    assert node.directions.shape == (3, 128)
    assert node.residual == 0.0
    assert node.eigenvalues[0] == pytest.approx(1.0, rel=1e-12)


def test_zero_state_node_2d_mixes_degenerate_modes():
    # the four-fold degenerate k=1 eigenspace must yield directions with
    # structure along both axes, not pure single-axis modes, so that the
    # downward search can leave the single-axis invariant subspaces
    p = ModelParams(GridSpec(2, 32), ConstantOrder(2.0), 0.02)
    node = zero_state_node(p)
    assert node.index == 5
    for v in node.directions[1:]:
        span_x = np.ptp(v.mean(axis=1))
        span_y = np.ptp(v.mean(axis=0))
        assert span_x > 0.1 and span_y > 0.1, (span_x, span_y)


def test_zero_state_node_variable_kappa():
    g = GridSpec(1, 64)
    x = g.coords()
    kf = RealField(g, 3e-3 + 2e-3 * np.cos(2 * np.pi * x))
    p = ModelParams(g, ConstantOrder(2.0), kf)
    node = zero_state_node(p)
    assert node.index >= 1
    assert node.directions.shape[0] == node.index


def test_small_landscape_build():
    # kappa=0.03 leaves only the constant mode unstable: the graph is the
    # zero state plus the two homogeneous minima
    g = GridSpec(1, 64)
    p = ModelParams(g, ConstantOrder(2.0), 0.03)
    graph = build_landscape(p, SaddleConfig(k=0))
    assert graph.summary() == {1: 1, 0: 2}
    assert len(graph.edges) == 2
    for e in graph.edges:
        assert e["mode"] == "downward"
        src = graph.nodes[e["from"]]
        dst = graph.nodes[e["to"]]
        assert dst.index < src.index
    for node in graph.nodes.values():
        assert node.residual <= 1e-8


def test_small_landscape_deterministic():
    g = GridSpec(1, 64)
    p = ModelParams(g, ConstantOrder(2.0), 0.03)
    a = build_landscape(p, SaddleConfig(k=0)).to_json()
    b = build_landscape(p, SaddleConfig(k=0)).to_json()
    assert a == b


def test_index_sweep_table():
    g = GridSpec(1, 128)
    rows, jumps = index_sweep(g, [2.0, 1.5, 1.3, 1.2], [0.02])
    table = {alpha: idx for _, alpha, idx in rows}
    assert table == {2.0: 3, 1.5: 5, 1.3: 7, 1.2: 9}
    # analytic jump loci for kappa=0.02 at wave numbers 2, 3, 4
    loci = {k: a for kappa, k, a in jumps if kappa == 0.02}
    assert loci[2] == pytest.approx(1.546, abs=2e-3)
    assert loci[3] == pytest.approx(1.332, abs=2e-3)
    assert loci[4] == pytest.approx(1.213, abs=2e-3)


def test_index_sweep_monotone():
    g = GridSpec(1, 64)
    alphas = np.linspace(1.0, 2.0, 9)
    kappas = [0.01, 0.015, 0.02]
    rows, _ = index_sweep(g, alphas, kappas)
    by_kappa = {}
    for kappa, alpha, idx in rows:
        by_kappa.setdefault(kappa, []).append((alpha, idx))
    for kappa, line in by_kappa.items():
        indices = [idx for _, idx in sorted(line)]
        assert indices == sorted(indices, reverse=True)


def test_match_constant_order_interval():
    # 1D alpha=1.5 at kappa=0.02 has index 5; the alpha=2 model matches on
    # the open interval (1/(36 pi^2), 1/(16 pi^2))
    g = GridSpec(1, 128)
    m = match_constant_order(1.5, 0.02, g)
    assert m.target_index == 5
    assert m.feasible
    assert m.kappa_lo == pytest.approx(1.0 / (36 * np.pi**2), rel=1e-12)
    assert m.kappa_hi == pytest.approx(1.0 / (16 * np.pi**2), rel=1e-12)
    assert not (m.kappa_lo < 0.01 < m.kappa_hi)


def test_match_constant_order_self_match():
    g = GridSpec(1, 128)
    m = match_constant_order(2.0, 0.02, g)
    assert m.kappa_lo < 0.02 < m.kappa_hi


def test_match_variable_order_recovers_reference_family():
    g = GridSpec(1, 128)
    x = g.coords()
    af = RealField(g, 1.3 + 0.2 * np.cos(2 * np.pi * x))
    plan = build_expansion(g, 30)
    p = ModelParams(g, VariableOrder(af), 0.02, fast_plan=plan)
    target, matches = match_variable_order(
        p, a_values=[2e-3, 3e-3, 4e-3], b_values=[1e-3, 2e-3, 3e-3]
    )
    assert target >= 1
    assert (3e-3, 2e-3) in matches


def test_match_variable_order_rejects_constant_model():
    p = ModelParams(GridSpec(1, 64), ConstantOrder(1.5), 0.02)
    with pytest.raises(UnsupportedModelError):
        match_variable_order(p, [1e-3], [1e-4])
