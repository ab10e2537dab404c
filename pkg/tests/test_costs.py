import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otkit.costs import (
    CostSpec,
    c_concavity_check,
    c_transform,
    c_transform_full,
    convex_profile,
    cost_matrix,
    lipschitz_constant,
)
from otkit.errors import DimensionMismatch, EmptyDomain, InfiniteExponent, InvalidExponent, ValidationError


def test_cost_matrix_examples():
    assert np.array_equal(cost_matrix(CostSpec("power", 1), [[0], [1]], [[0], [1]]), [[0, 1], [1, 0]])
    assert cost_matrix(CostSpec("scaled_power", 2), [[0]], [[2]])[0, 0] == 2
    assert cost_matrix(CostSpec("power", 2), [[0, 0]], [[3, 4]])[0, 0] == 25


def test_cost_matrix_errors():
    with pytest.raises(DimensionMismatch):
        cost_matrix(CostSpec("power", 1), [[0, 0]], [[0]])
    with pytest.raises(InfiniteExponent):
        cost_matrix(CostSpec("power", math.inf), [[0]], [[1]])
    with pytest.raises(InvalidExponent):
        CostSpec("power", 0.5)
    with pytest.raises(ValidationError):
        CostSpec("cubic", 2)


def test_fractional_power_matches_direct():
    rng = np.random.default_rng(0)
    X, Y = rng.random((6, 2)), rng.random((5, 2))
    C = cost_matrix(CostSpec("power", 1.5), X, Y)
    D = np.linalg.norm(X[:, None] - Y[None], axis=2)
    assert np.allclose(C, D**1.5, rtol=1e-14, atol=0)
    assert cost_matrix(CostSpec("power", 1.5), [[0.0]], [[0.0]])[0, 0] == 0


def test_convex_profiles():
    spec = CostSpec("convex", h="quadratic")
    assert cost_matrix(spec, [[0.0]], [[2.0]])[0, 0] == 2.0
    prof = convex_profile("p_power", 3)
    w = np.array([[0.3, -0.4]])
    # grad h* inverts grad h: grad h(z) = |z|^(p-2) z
    z = prof.grad_h_star(w)
    back = np.linalg.norm(z) ** (prof.p - 2) * z
    assert np.allclose(back, w, rtol=1e-14)
    with pytest.raises(InvalidExponent):
        convex_profile("p_power", 1)
    with pytest.raises(ValidationError):
        convex_profile("quartic")


def test_json_round_trip():
    for spec in (CostSpec("power", 2), CostSpec("scaled_power", 1.5), CostSpec("convex", h="quadratic"), CostSpec("power", math.inf)):
        assert CostSpec.from_json(spec.to_json()) == spec


def test_c_transform_distance_to_support():
    vals = c_transform([0.0, 0.0], CostSpec("power", 1), [[0], [1]], [[0], [0.5]])
    assert np.array_equal(vals, [0, 0.5])


def test_c_transform_ties_and_errors():
    res = c_transform_full([0.0, 0.0], CostSpec("power", 1), [[0], [1]], [[0.5]])
    assert res.argmins == ((0, 1),) and res.has_ties
    with pytest.raises(EmptyDomain):
        c_transform([], CostSpec("power", 1), np.zeros((0, 1)), [[0]], C=np.zeros((0, 1)))
    with pytest.raises(DimensionMismatch):
        c_transform([0.0], CostSpec("power", 1), [[0], [1]], [[0]])


def test_c_transform_brute_force():
    rng = np.random.default_rng(1)
    spec = CostSpec("power", 2)
    X, Y, chi = rng.random((7, 2)), rng.random((5, 2)), rng.normal(size=7)
    got = c_transform(chi, spec, X, Y)
    for j, y in enumerate(Y):
        assert got[j] == min(spec(x, y) - chi[i] for i, x in enumerate(X))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.sampled_from([1, 2, 3, 1.5]), st.integers(0, 10_000))
def test_triple_transform_exact(m, n, p, seed):
    rng = np.random.default_rng(seed)
    X, Y, chi = rng.random((m, 2)), rng.random((n, 2)), rng.normal(size=m)
    spec = CostSpec("power", p)
    C = cost_matrix(spec, X, Y)
    c1 = c_transform(chi, spec, X, Y, C, exact=True)
    c3 = c_transform(c_transform(c1, spec, Y, X, C.T, exact=True), spec, X, Y, C, exact=True)
    assert list(c1) == list(c3)


def test_lipschitz_psi_c_is_minus_psi():
    X = np.linspace(-1, 1, 21)[:, None]
    psi = np.abs(X[:, 0] - 0.3)
    out = c_transform(psi, CostSpec("power", 1), X, X)
    assert np.abs(out + psi).max() <= 1e-15


def test_c_concavity():
    rng = np.random.default_rng(2)
    X, Y = rng.random((6, 1)), rng.random((5, 1))
    spec = CostSpec("power", 2)
    psi = c_transform(rng.normal(size=6), spec, X, Y)
    assert c_concavity_check(psi, spec, X, Y).is_c_concave
    Y3 = np.array([[0.0], [1.0], [2.0]])
    rep = c_concavity_check(Y3[:, 0] ** 2, CostSpec("power", 1), Y3, Y3)
    assert not rep.is_c_concave and rep.lipschitz == 3
    for s in (CostSpec("power", 1), CostSpec("power", 2), CostSpec("scaled_power", 3)):
        assert c_concavity_check(np.full(5, 0.7), s, Y, Y).is_c_concave


def test_quadratic_convexity_characterization():
    Y = np.linspace(0, 1, 6)[:, None]
    X = np.linspace(0, 1, 9)[:, None]
    spec = CostSpec("scaled_power", 2)
    psi = c_transform(np.random.default_rng(3).normal(size=9), spec, X, Y)
    assert c_concavity_check(psi, spec, X, Y).quadratic_convex


def test_lipschitz_constant():
    assert lipschitz_constant([0, 1, 4], [[0], [1], [2]]) == 3
    assert lipschitz_constant([5], [[0]]) == 0
