import numpy as np
import pytest

from otkit.errors import BoundaryIndex, InvalidExponent, MisalignedSamples, OutOfRange, ValidationError, ZeroStep
from otkit.geodesics import (
    InterpolationPath,
    PanelFunction,
    VelocityAssignment,
    constant_speed_defect,
    continuity_residual,
    default_panel,
    discrete_velocity,
    geodesic_path,
    mccann_interpolate,
    metric_derivative,
    path_from_plan,
    path_velocities,
    speed_profile,
)
from otkit.measures import dirac, new_discrete, translate
from otkit.solver import TransportPlan
from otkit.wasserstein import wasserstein


def _pair(seed, m=4, n=4):
    rng = np.random.default_rng(seed)
    return (
        new_discrete(rng.random((m, 2)), rng.random(m) + 0.1),
        new_discrete(rng.random((n, 2)), rng.random(n) + 0.1),
    )


def test_mccann_endpoints_and_dirac():
    mu, nu = dirac([0.0]), dirac([1.0])
    g = TransportPlan([0], [0], [1.0], mu, nu)
    assert mccann_interpolate(g, 0) is mu and mccann_interpolate(g, 1) is nu
    assert mccann_interpolate(g, 0.3).same_as(dirac([0.3]))
    with pytest.raises(OutOfRange):
        mccann_interpolate(g, 1.5)


def test_mccann_split_plan():
    g = TransportPlan([0, 0], [0, 1], [0.5, 0.5], dirac([0.0]), new_discrete([[-1.0], [1.0]]))
    assert mccann_interpolate(g, 0.5).same_as(new_discrete([[-0.5], [0.5]]))


def test_dirac_geodesic():
    path = geodesic_path(dirac([0.0]), dirac([1.0]), 2, 5)
    for t, m in path.samples:
        assert m.same_as(dirac([t]))
    with pytest.raises(InvalidExponent):
        geodesic_path(dirac([0.0]), dirac([1.0]), 0.5)


def test_p1_path_is_flagged():
    path = geodesic_path(dirac([0.0]), dirac([1.0]), 1, 3)
    assert not path.canonical


@pytest.mark.parametrize("seed", range(6))
def test_constant_speed(seed):
    mu, nu = _pair(seed)
    path = geodesic_path(mu, nu, 2, 7)
    W = wasserstein(mu, nu, 2)
    assert constant_speed_defect(path) <= 1e-8 * (1 + W)
    assert np.allclose(speed_profile(path), W, atol=1e-9)


def test_constant_path():
    mu, _ = _pair(1)
    path = geodesic_path(mu, mu, 2, 4)
    assert constant_speed_defect(path) == 0
    vel = path_velocities(path)
    assert all(np.all(v.vectors == 0) for v in vel)


def test_metric_derivative_boundaries():
    mu, nu = dirac([0.0, 0.0]), dirac([0.6, 0.8])
    path = geodesic_path(mu, nu, 2, 5)
    assert metric_derivative(path, 2) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(BoundaryIndex):
        metric_derivative(path, 0)
    with pytest.raises(BoundaryIndex):
        metric_derivative(path, 9)
    assert metric_derivative(path, 0, allow_one_sided=True) == pytest.approx(1.0, abs=1e-14)


def test_metric_derivative_reparametrized():
    mu, nu = dirac([0.0]), dirac([2.0])
    g = TransportPlan([0], [0], [1.0], mu, nu)
    ts = np.linspace(0, 1, 401)
    path = path_from_plan(g, ts, 2, param=lambda t: t * t)
    for k in (100, 200, 300):
        assert metric_derivative(path, k) == pytest.approx(2 * ts[k] * 2.0, rel=1e-10)
    with pytest.raises(ValidationError):
        path_velocities(path)


def test_discrete_velocity_translation():
    mu, _ = _pair(3)
    z = np.array([0.05, -0.02])
    v = discrete_velocity(mu, translate(mu, z), 1.0, 2)
    assert v.map_induced and np.allclose(v.vectors, z, atol=1e-15)
    v0 = discrete_velocity(mu, mu, 0.5, 2)
    assert np.all(v0.vectors == 0) and v0.lp_norm == 0
    with pytest.raises(ZeroStep):
        discrete_velocity(mu, mu, 0.0)


def test_discrete_velocity_on_geodesic():
    mu, nu = _pair(4)
    path = geodesic_path(mu, nu, 2, 11)
    W = wasserstein(mu, nu, 2)
    for k in range(10):
        v = discrete_velocity(path.measures[k], path.measures[k + 1], 0.1, 2)
        if v.map_induced:
            assert v.lp_norm == pytest.approx(W, abs=1e-6)
        assert v.lp_norm <= v.bound + 1e-12


def test_discrete_velocity_split_flags():
    v = discrete_velocity(dirac([0.0]), new_discrete([[-1.0], [1.0]]), 1.0, 2)
    assert not v.map_induced and v.lp_norm <= v.bound


def test_residual_constant_path_and_line():
    mu, _ = _pair(5)
    path = geodesic_path(mu, mu, 2, 5)
    zero = [VelocityAssignment(m, np.zeros_like(m.points), 2, 0.0) for m in path.measures]
    tab = continuity_residual(path, zero)
    assert all(v == 0 for v in tab.total.values())
    e = np.array([0.6, 0.8])
    line = InterpolationPath(None, 2, [0.0, 0.5, 1.0], [dirac(t * e) for t in (0.0, 0.5, 1.0)])
    vel = [VelocityAssignment(m, np.tile(e, (1, 1)), 2, 1.0) for m in line.measures]
    lin = PanelFunction("x.e", lambda X: X @ e, lambda X: np.tile(e, (len(X), 1)), "linear")
    assert continuity_residual(line, vel, [lin]).total["x.e"] == 0.0


def test_residual_misaligned():
    mu, nu = _pair(6)
    path = geodesic_path(mu, nu, 2, 5)
    vel = path_velocities(path)
    with pytest.raises(MisalignedSamples):
        continuity_residual(path, vel[:-1])


def test_residual_second_order_on_bumps():
    mu, nu = _pair(7)
    res = []
    for k in (9, 17, 33):  # h halves exactly
        path = geodesic_path(mu, nu, 2, k)
        bumps = [f for f in default_panel(2) if f.kind == "smooth"]
        res.append(sum(continuity_residual(path, path_velocities(path), bumps).total.values()))
    ratios = [a / b for a, b in zip(res, res[1:])]
    assert all(3.4 <= r <= 4.6 for r in ratios), ratios


def test_residual_exact_for_quadratics():
    mu, nu = _pair(8, 5, 3)
    path = geodesic_path(mu, nu, 2, 8)
    quad = [f for f in default_panel(2) if f.kind in ("linear", "quadratic")]
    tab = continuity_residual(path, path_velocities(path), quad)
    assert max(tab.total.values()) <= 1e-13


def test_panel_gradients():
    X = np.random.default_rng(9).random((5, 2))
    for f in default_panel(2):
        h = 1e-6
        num = np.stack([(f.value(X + h * e) - f.value(X - h * e)) / (2 * h) for e in np.eye(2)], axis=1)
        assert np.allclose(num, f.grad(X), atol=1e-7), f.name
