"""Displacement interpolation, speeds, velocities and the weak continuity equation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .costs import CostSpec, cost_matrix
from .errors import BoundaryIndex, InvalidExponent, MisalignedSamples, OutOfRange, ValidationError, ZeroStep
from .measures import DiscreteMeasure, new_discrete
from .solver import TransportPlan, extract_map, solve_primal
from .wasserstein import wasserstein


@dataclass
class InterpolationPath:
    """Sampled curve of measures; ``provenance[k][e]`` is the atom of sample ``k``
    carrying plan entry ``e`` (``None`` when the path is not plan-generated)."""

    gamma: TransportPlan | None
    p: float
    times: list
    measures: list
    provenance: list | None = field(default=None, repr=False)
    canonical: bool = True
    reparametrized: bool = False

    def __len__(self):
        return len(self.times)

    @property
    def samples(self):
        return list(zip(self.times, self.measures))


@dataclass
class VelocityAssignment:
    base: DiscreteMeasure
    vectors: np.ndarray
    p: float
    lp_norm: float
    map_induced: bool = True
    bound: float | None = None  # W_p / h; equals lp_norm when map_induced

    def to_json(self) -> dict:
        return {
            "vectors": self.vectors.tolist(),
            "p": self.p,
            "lp_norm": self.lp_norm,
            "map_induced": self.map_induced,
            "bound": self.bound,
        }


def _lp_norm(weights, vectors, p) -> float:
    speeds = np.linalg.norm(vectors, axis=1)
    return float(np.dot(weights, speeds**p) ** (1.0 / p))


def _interpolate(gamma: TransportPlan, s: float):
    X = gamma.mu.points[gamma.src]
    Y = gamma.nu.points[gamma.tgt]
    P = X + s * (Y - X)
    m = new_discrete(P, gamma.mass)
    _, owner = cKDTree(m.points).query(P)
    return m, owner


def mccann_interpolate(gamma: TransportPlan, s: float) -> DiscreteMeasure:
    """``(p_s)# gamma`` with ``p_s(x, y) = x + s (y - x)``; colliding atoms merge."""
    if not 0.0 <= s <= 1.0:
        raise OutOfRange(f"interpolation time {s} outside [0, 1]")
    if s == 0.0:
        return gamma.mu
    if s == 1.0:
        return gamma.nu
    return _interpolate(gamma, s)[0]


def path_from_plan(gamma: TransportPlan, times, p: float = 2.0, param=None) -> InterpolationPath:
    """Sample ``s -> (p_s)# gamma`` at ``param(t)`` for each time ``t`` (identity by default)."""
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise MisalignedSamples("sample times must be strictly increasing")
    measures, prov = [], []
    for t in times:
        s = param(t) if param is not None else t
        if not 0.0 <= s <= 1.0:
            raise OutOfRange(f"interpolation time {s} outside [0, 1]")
        m, owner = _interpolate(gamma, s)
        if s == 0.0:
            m = gamma.mu
            owner = gamma.src.copy()
        elif s == 1.0:
            m = gamma.nu
            owner = gamma.tgt.copy()
        measures.append(m)
        prov.append(owner)
    return InterpolationPath(gamma, p, times, measures, prov, canonical=p > 1, reparametrized=param is not None)


def geodesic_path(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0, k: int = 5) -> InterpolationPath:
    """Constant-speed geodesic from an optimal plan for ``|x-y|^p``, sampled at ``k`` equispaced times.

    For ``p = 1`` the path is still built but marked non-canonical, since
    geodesics are then not unique.
    """
    if not p >= 1:
        raise InvalidExponent(f"p must be >= 1, got {p}")
    if k < 2:
        raise ValidationError("need at least two samples")
    C = cost_matrix(CostSpec("power", p), mu.points, nu.points)
    gamma = solve_primal(mu, nu, C)
    return path_from_plan(gamma, np.linspace(0.0, 1.0, k), p)


def path_velocities(path: InterpolationPath) -> list:
    """Exact per-atom velocities of a plan-generated path.

    Each plan entry moves at constant velocity ``(y - x) * ds/dt``; merged
    atoms get the mass-weighted mean, which conserves momentum.
    """
    if path.gamma is None or path.provenance is None:
        raise ValidationError("path has no transport plan attached")
    if path.reparametrized:
        raise ValidationError("velocities need the s = t parametrization")
    g = path.gamma
    D = g.nu.points[g.tgt] - g.mu.points[g.src]
    out = []
    for m, owner in zip(path.measures, path.provenance):
        mom = np.zeros((m.size, m.dim))
        np.add.at(mom, owner, g.mass[:, None] * D)
        mass = np.bincount(owner, weights=g.mass, minlength=m.size)
        vec = mom / mass[:, None]
        out.append(VelocityAssignment(m, vec, path.p, _lp_norm(m.weights, vec, path.p)))
    return out


def metric_derivative(path: InterpolationPath, t: int, allow_one_sided: bool = False) -> float:
    """Finite-difference speed ``W_p(mu(t-1), mu(t+1)) / (time span)`` at sample ``t``.

    Endpoints raise :class:`BoundaryIndex` unless ``allow_one_sided`` is set,
    in which case a first-order one-sided quotient is returned.
    """
    n = len(path)
    if n < 2 or not 0 <= t < n:
        raise BoundaryIndex(f"sample index {t} outside the path")
    if 0 < t < n - 1:
        a, b = t - 1, t + 1
    elif not allow_one_sided:
        raise BoundaryIndex(f"sample {t} is an endpoint; central difference undefined")
    else:
        a, b = (0, 1) if t == 0 else (n - 2, n - 1)
    w = wasserstein(path.measures[a], path.measures[b], path.p)
    return w / (path.times[b] - path.times[a])


def discrete_velocity(mu_t: DiscreteMeasure, mu_th: DiscreteMeasure, h: float, p: float = 2.0) -> VelocityAssignment:
    """``v(x) = (T(x) - x) / h`` for the optimal map ``T`` from ``mu_t`` to ``mu_th``.

    If the optimal plan splits mass, each atom gets its barycentric
    velocity and ``map_induced`` is False; ``bound = W_p / h`` then only
    bounds ``lp_norm`` from above.
    """
    if not h > 0:
        raise ZeroStep(f"time step must be positive, got {h}")
    if not p >= 1:
        raise InvalidExponent(f"p must be >= 1, got {p}")
    C = cost_matrix(CostSpec("power", p), mu_t.points, mu_th.points)
    plan = solve_primal(mu_t, mu_th, C)
    w = max(plan.cost(C), 0.0) ** (1.0 / p)
    T = extract_map(plan)
    if isinstance(T, np.ndarray):
        vec = (T - mu_t.points) / h
        induced = True
    else:
        bary = np.zeros_like(mu_t.points)
        np.add.at(bary, plan.src, plan.mass[:, None] * mu_th.points[plan.tgt])
        vec = (bary / mu_t.weights[:, None] - mu_t.points) / h
        induced = False
    return VelocityAssignment(mu_t, vec, p, _lp_norm(mu_t.weights, vec, p), induced, w / h)


@dataclass(frozen=True)
class PanelFunction:
    name: str
    value: object  # (n, d) -> (n,)
    grad: object  # (n, d) -> (n, d)
    kind: str = "smooth"


def default_panel(dim: int) -> list:
    """Coordinates, quadratic monomials and three Gaussian bumps."""
    panel = []
    for a in range(dim):
        e = np.eye(dim)[a]
        panel.append(PanelFunction(f"x{a}", lambda X, a=a: X[:, a], lambda X, e=e: np.tile(e, (len(X), 1)), "linear"))
    for a in range(dim):
        for b in range(a, dim):
            def val(X, a=a, b=b):
                return X[:, a] * X[:, b]

            def grad(X, a=a, b=b):
                G = np.zeros_like(X)
                G[:, a] += X[:, b]
                G[:, b] += X[:, a]
                return G

            panel.append(PanelFunction(f"x{a}*x{b}", val, grad, "quadratic"))
    panel.append(
        PanelFunction("|x|^2", lambda X: np.einsum("ij,ij->i", X, X), lambda X: 2 * X, "quadratic")
    )
    for k, (c, sig) in enumerate([(0.25, 0.3), (0.5, 0.5), (0.75, 0.2)]):
        center = np.full(dim, c)

        def val(X, center=center, sig=sig):
            return np.exp(-np.sum((X - center) ** 2, axis=1) / (2 * sig * sig))

        def grad(X, center=center, sig=sig, val=val):
            return -(X - center) / (sig * sig) * val(X)[:, None]

        panel.append(PanelFunction(f"bump{k}", val, grad))
    return panel


@dataclass
class ResidualTable:
    """Per test function: largest single-step residual and the summed
    ``|residual|`` over all steps (the accumulated error on [t_0, t_end])."""

    max_step: dict
    total: dict
    kinds: dict

    def to_json(self) -> dict:
        return {"max_step": self.max_step, "total": self.total}


def continuity_residual(path: InterpolationPath, velocities, testfns=None) -> ResidualTable:
    """Weak continuity equation with trapezoidal time integration.

    For consecutive samples ``t1 < t2``:
    ``r = [int phi dmu_t2 - int phi dmu_t1] - trapezoid(int grad phi . v dmu)``.
    """
    if len(velocities) != len(path):
        raise MisalignedSamples(f"{len(velocities)} velocity fields for {len(path)} samples")
    for m, v in zip(path.measures, velocities):
        if v.vectors.shape != m.points.shape:
            raise MisalignedSamples("velocity field does not match its sample measure")
    if testfns is None:
        testfns = default_panel(path.measures[0].dim)
    max_step, total, kinds = {}, {}, {}
    for tf in testfns:
        Phi = np.array([m.integrate(tf.value) for m in path.measures])
        G = np.array(
            [np.dot(m.weights, np.einsum("ij,ij->i", tf.grad(m.points), v.vectors)) for m, v in zip(path.measures, velocities)]
        )
        dt = np.diff(path.times)
        r = np.diff(Phi) - dt * 0.5 * (G[:-1] + G[1:])
        max_step[tf.name] = float(np.abs(r).max(initial=0.0))
        total[tf.name] = float(np.abs(r).sum())
        kinds[tf.name] = tf.kind
    return ResidualTable(max_step, total, kinds)


def speed_profile(path: InterpolationPath) -> list:
    """Central-difference metric derivative at every interior sample."""
    return [metric_derivative(path, t) for t in range(1, len(path) - 1)]


def constant_speed_defect(path: InterpolationPath) -> float:
    """``max |W_p(mu(s), mu(t)) - |s - t| W_p(mu(0), mu(1))|`` over sample pairs."""
    total = wasserstein(path.measures[0], path.measures[-1], path.p)
    worst = 0.0
    for a in range(len(path)):
        for b in range(a + 1, len(path)):
            w = wasserstein(path.measures[a], path.measures[b], path.p)
            worst = max(worst, abs(w - abs(path.times[b] - path.times[a]) * total))
    return worst
