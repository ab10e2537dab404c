import math

import numpy as np
import pytest

from oracles import lp_transport, min_cost_flow_lp
from otkit.beckmann import (
    build_grid_graph,
    equivalence_gap,
    graph_distances,
    kantorovich_potential_on_nodes,
    lipschitz_dual_check,
    snap_measure,
    solve_beckmann,
)
from otkit.errors import DegenerateBox, MassMismatch, OutOfDomain
from otkit.measures import dirac, new_discrete
from otkit.wasserstein import wasserstein

SQUARE = [[0, 1], [0, 1]]


def _delta(g, k):
    w = np.zeros(g.n_nodes)
    w[k] = 1.0
    return w


def test_graph_counts():
    g = build_grid_graph([[0, 1]], 2)
    assert g.n_nodes == 2 and g.n_edges == 1 and g.lengths[0] == 1
    g = build_grid_graph(SQUARE, 3)
    assert g.n_nodes == 9 and g.n_edges == 12
    g = build_grid_graph(SQUARE, 3, diagonals=True)
    assert g.n_edges == 20
    diag = g.lengths[g.lengths > 0.6]
    assert len(diag) == 8 and np.allclose(diag, 0.7071067811865476, rtol=1e-15)
    with pytest.raises(DegenerateBox):
        build_grid_graph([[0, 0], [0, 1]], 3)
    with pytest.raises(DegenerateBox):
        build_grid_graph(SQUARE, 1)


def test_snap():
    g = build_grid_graph(SQUARE, 3)
    assert snap_measure(dirac([0.5, 0.5]), g)[4] == 1
    assert snap_measure(dirac([0.25, 0.25]), g)[0] == 1  # tie goes to the smallest corner
    w = snap_measure(new_discrete([[0, 0], [0, 1], [1, 0], [1, 1]]), g)
    assert w.sum() == 1 and np.array_equal(w[[0, 2, 6, 8]], [0.25] * 4)
    with pytest.raises(OutOfDomain):
        snap_measure(dirac([1.5, 0.0]), g)


def test_trivial_flows():
    g = build_grid_graph([[0, 1]], 2)
    f = solve_beckmann(g, _delta(g, 0), _delta(g, 1))
    assert f.mass == 1 and abs(f.flow[0]) == 1
    assert equivalence_gap(g, _delta(g, 0), _delta(g, 1)).as_tuple() == (1, 1, 0)
    g = build_grid_graph(SQUARE, 4)
    w = np.random.default_rng(0).random(16)
    w /= w.sum()
    assert solve_beckmann(g, w, w).mass == 0


def test_corner_to_corner():
    g = build_grid_graph(SQUARE, 3)
    rep = equivalence_gap(g, _delta(g, 0), _delta(g, 8))
    assert rep.as_tuple() == (2, 2, 0)
    assert graph_distances(g, [0])[0, 8] == 2
    assert np.abs(rep.flow.divergence_residual(_delta(g, 0), _delta(g, 8))).max() <= 1e-12


@pytest.mark.parametrize("seed", range(6))
def test_against_lp_and_kantorovich(seed):
    rng = np.random.default_rng(seed)
    g = build_grid_graph(SQUARE, 5, diagonals=bool(seed % 2))
    mu, nu = rng.random(25), rng.random(25)
    mu[rng.random(25) < 0.5] = 0
    mu[0] += 0.1
    mu, nu = mu / mu.sum(), nu / nu.sum()
    f = solve_beckmann(g, mu, nu)
    ref = min_cost_flow_lp(g.edges, g.lengths, mu - nu)
    assert f.mass == pytest.approx(ref, rel=1e-9, abs=1e-12)
    assert np.abs(f.divergence_residual(mu, nu)).max() <= 1e-9
    D = graph_distances(g)
    assert lp_transport(mu, nu, D) == pytest.approx(ref, rel=1e-8)
    rep = equivalence_gap(g, mu, nu)
    assert rep.gap <= 1e-8 * (1 + rep.kantorovich_value)


def test_mass_mismatch():
    g = build_grid_graph(SQUARE, 3)
    with pytest.raises(MassMismatch):
        solve_beckmann(g, _delta(g, 0), 0.5 * _delta(g, 8))


def test_lipschitz_dual_examples():
    g = build_grid_graph(SQUARE, 4)
    mu, nu = _delta(g, 0), _delta(g, 15)
    B = solve_beckmann(g, mu, nu).mass
    phi = graph_distances(g, [15])[0]
    rep = lipschitz_dual_check(g, mu, nu, phi, B)
    assert rep.gradient_bound == pytest.approx(1, abs=1e-12) and rep.feasible and rep.weak_duality
    rep2 = lipschitz_dual_check(g, mu, nu, 2 * phi, B)
    assert rep2.gradient_bound == pytest.approx(2, abs=1e-12) and not rep2.feasible


@pytest.mark.parametrize("seed", range(4))
def test_strong_duality(seed):
    rng = np.random.default_rng(10 + seed)
    g = build_grid_graph(SQUARE, 5)
    mu, nu = rng.random(25), rng.random(25)
    mu, nu = mu / mu.sum(), nu / nu.sum()
    B = solve_beckmann(g, mu, nu).mass
    phi = kantorovich_potential_on_nodes(g, mu, nu)
    rep = lipschitz_dual_check(g, mu, nu, phi, B)
    assert rep.feasible and rep.objective == pytest.approx(B, abs=1e-8)


def test_orientation_invariance():
    rng = np.random.default_rng(3)
    g = build_grid_graph(SQUARE, 4)
    mu, nu = rng.random(16), rng.random(16)
    mu, nu = mu / mu.sum(), nu / nu.sum()
    f = solve_beckmann(g, mu, nu)
    flipped = g.edges[:, ::-1]
    assert min_cost_flow_lp(flipped, g.lengths, mu - nu) == pytest.approx(f.mass, rel=1e-9)


def test_diagonal_refinement_toward_euclidean():
    a, b = dirac([0.0, 0.0]), dirac([1.0, 0.5])
    target = wasserstein(a, b, 1)
    errs = []
    for res in (3, 5, 9, 17):
        g = build_grid_graph(SQUARE, res, diagonals=True)
        errs.append(solve_beckmann(g, snap_measure(a, g), snap_measure(b, g)).mass - target)
    assert all(e >= -1e-12 for e in errs)
    assert all(e1 <= e0 + 1e-12 for e0, e1 in zip(errs, errs[1:]))
    # 8-neighbour metric between node-aligned points: max + (sqrt2 - 1) min, at every resolution
    assert errs[-1] == pytest.approx(1 + (math.sqrt(2) - 1) * 0.5 - target, abs=1e-12)


def test_diagonals_beat_axis_edges():
    a, b = dirac([0.0, 0.0]), dirac([1.0, 0.5])
    g4, g8 = build_grid_graph(SQUARE, 9), build_grid_graph(SQUARE, 9, diagonals=True)
    m4 = solve_beckmann(g4, snap_measure(a, g4), snap_measure(b, g4)).mass
    m8 = solve_beckmann(g8, snap_measure(a, g8), snap_measure(b, g8)).mass
    assert m4 == pytest.approx(1.5, abs=1e-12) and wasserstein(a, b, 1) < m8 < m4


def test_flow_json():
    g = build_grid_graph([[0, 1]], 3)
    out = solve_beckmann(g, _delta(g, 0), _delta(g, 2)).to_json()
    assert out["mass"] == 1.0 and all(len(e) == 3 for e in out["edges"])
