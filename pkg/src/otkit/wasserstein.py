"""Wasserstein distances W_p, W_inf and the inequalities relating them."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .costs import CostSpec, cost_matrix, distance_matrix
from .errors import DiameterViolated, DimensionMismatch, InvalidExponent
from .measures import DiscreteMeasure, moment_p
from .solver import TransportPlan, solve_bottleneck, solve_primal

ORDER_TOL = 1e-9


@dataclass
class DistanceReport:
    p: float
    value: float
    plan: TransportPlan = field(repr=False)
    wall_time: float = 0.0

    def to_json(self, with_plan: bool = False) -> dict:
        out = {"p": "inf" if math.isinf(self.p) else self.p, "value": self.value}
        if with_plan:
            out["plan"] = self.plan.to_json()
        return out


def _same_dim(mu, nu):
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"dimension {mu.dim} vs {nu.dim}")


def wasserstein_p(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> DistanceReport:
    """``(min_gamma sum gamma_ij |x_i - y_j|^p) ** (1/p)``."""
    if math.isinf(p):
        return wasserstein_inf(mu, nu)
    if not p >= 1:
        raise InvalidExponent(f"W_p needs p >= 1, got {p}")
    _same_dim(mu, nu)
    t0 = time.perf_counter()
    C = cost_matrix(CostSpec("power", p), mu.points, nu.points)
    plan = solve_primal(mu, nu, C)
    value = max(plan.cost(C), 0.0) ** (1.0 / p)
    return DistanceReport(p, value, plan, time.perf_counter() - t0)


def wasserstein_inf(mu: DiscreteMeasure, nu: DiscreteMeasure) -> DistanceReport:
    _same_dim(mu, nu)
    t0 = time.perf_counter()
    value, plan = solve_bottleneck(mu, nu)
    return DistanceReport(math.inf, value, plan, time.perf_counter() - t0)


def wasserstein(mu, nu, p) -> float:
    return wasserstein_p(mu, nu, p).value


def support_diameter(*measures: DiscreteMeasure) -> float:
    pts = np.vstack([m.points for m in measures])
    return float(distance_matrix(pts, pts).max())


@dataclass
class OrderingReport:
    p1: float
    p2: float
    D: float
    w_p1: float
    w_p2: float
    upper_bound: float
    lower_ok: bool
    upper_ok: bool

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


def ordering_check(mu, nu, p1: float, p2: float, D: float, tol: float = ORDER_TOL) -> OrderingReport:
    """``W_p1 <= W_p2 <= D^(1 - p1/p2) W_p1^(p1/p2)`` on a domain of diameter ``D``."""
    if not (1 <= p1 <= p2) or math.isinf(p2):
        raise InvalidExponent(f"need 1 <= p1 <= p2 < inf, got {p1}, {p2}")
    observed = support_diameter(mu, nu)
    if D < observed - 1e-12:
        raise DiameterViolated(f"supplied diameter {D} is below the support diameter {observed}")
    w1 = wasserstein_p(mu, nu, p1).value
    w2 = wasserstein_p(mu, nu, p2).value
    upper = D ** (1 - p1 / p2) * w1 ** (p1 / p2)
    return OrderingReport(p1, p2, D, w1, w2, upper, w1 <= w2 + tol, w2 <= upper + tol)


def _default_frequencies(dim: int) -> np.ndarray:
    # three fixed frequencies, deterministic per dimension
    base = np.array([1.0, 2.5, 5.0])
    out = np.zeros((3, dim))
    for k in range(3):
        out[k] = base[k] * np.cos(np.arange(dim) + k) / max(1.0, math.sqrt(dim))
    return out


def growth_panel(dim: int, p: float):
    """Named test functions of growth at most ``|x|^p``."""
    panel = [("one", lambda X: np.ones(len(X)))]
    for a in range(dim):
        panel.append((f"x{a}", lambda X, a=a: X[:, a]))
    panel.append(("norm", lambda X: np.linalg.norm(X, axis=1)))
    panel.append((f"norm^{p:g}", lambda X: np.linalg.norm(X, axis=1) ** p))
    for k, xi in enumerate(_default_frequencies(dim)):
        panel.append((f"cos{k}", lambda X, xi=xi: np.cos(X @ xi)))
    return panel


@dataclass
class ConvergenceReport:
    p: float
    distances: list
    moment_gaps: list
    integral_gaps: dict  # panel name -> list over the sequence


def convergence_report(seq, limit: DiscreteMeasure, p: float) -> ConvergenceReport:
    """Per-index ``W_p(mu_n, mu)``, moment gap and test-integral gaps."""
    if not p >= 1:
        raise InvalidExponent(f"p must be >= 1, got {p}")
    panel = growth_panel(limit.dim, p)
    ref_m = moment_p(limit, p)
    ref_int = {name: limit.integrate(fn) for name, fn in panel}
    dists, mgaps = [], []
    gaps = {name: [] for name, _ in panel}
    for m in seq:
        _same_dim(m, limit)
        dists.append(wasserstein_p(m, limit, p).value)
        mgaps.append(abs(moment_p(m, p) - ref_m))
        for name, fn in panel:
            gaps[name].append(m.integrate(fn) - ref_int[name])
    return ConvergenceReport(p, dists, mgaps, gaps)
