"""One-dimensional Brenier maps and Monge-Ampere residuals.

Densities are piecewise constant on uniform cells, so their CDFs are
piecewise linear and the monotone rearrangement ``G^-1 o F`` can be
evaluated exactly for such inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostSpec, cost_matrix
from .errors import DegenerateDensity, OutOfRange, ValidationError
from .measures import new_discrete
from .solver import TransportPlan, extract_map, solve_primal

U_MIN = 1e-12
NORM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Density1D:
    a: float
    b: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if not self.b > self.a:
            raise ValidationError(f"empty interval [{self.a}, {self.b}]")
        if vals.ndim != 1 or vals.size < 1:
            raise ValidationError("density needs at least one cell")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("density values must be finite")
        if vals.min() < U_MIN:
            raise DegenerateDensity(f"cell value {vals.min():.3e} below {U_MIN:g}")
        mass = vals.sum() * (self.b - self.a) / vals.size
        if abs(mass - 1.0) > NORM_TOL:
            raise ValidationError(f"density integrates to {mass!r}, not 1")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, fn, a: float, b: float, n: int) -> "Density1D":
        """Cell-center samples of ``fn``, renormalized to unit mass."""
        h = (b - a) / n
        x = a + h * (np.arange(n) + 0.5)
        v = np.asarray(fn(x), dtype=float) * np.ones(n)
        if v.min() < U_MIN:
            raise DegenerateDensity(f"cell value {v.min():.3e} below {U_MIN:g}")
        return cls(a, b, v / (v.sum() * h))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def centers(self) -> np.ndarray:
        return self.a + self.h * (np.arange(self.n) + 0.5)

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n + 1)

    def cdf_nodes(self) -> np.ndarray:
        F = np.concatenate([[0.0], np.cumsum(self.values) * self.h])
        return F / F[-1]

    def cdf(self, x) -> np.ndarray:
        return np.interp(x, self.edges, self.cdf_nodes())

    def quantile(self, q) -> np.ndarray:
        # CDF is strictly increasing, so linear interpolation inverts it exactly
        return np.interp(q, self.cdf_nodes(), self.edges)

    def __call__(self, y) -> np.ndarray:
        """Piecewise-constant evaluation; points on a cell edge take the right cell."""
        y = np.asarray(y, dtype=float)
        k = np.clip(np.floor((y - self.a) / self.h).astype(int), 0, self.n - 1)
        return self.values[k]


@dataclass
class MonotoneMap1D:
    x: np.ndarray  # cell centers of the source
    T: np.ndarray

    def is_monotone(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.T) >= -tol))


def rearrangement_at(u: Density1D, v: Density1D, x) -> np.ndarray:
    """``G^-1(F(x))`` at arbitrary points of ``[u.a, u.b]``."""
    return v.quantile(u.cdf(x))


def monotone_rearrangement(u: Density1D, v: Density1D) -> MonotoneMap1D:
    """Non-decreasing map pushing ``u`` onto ``v``, sampled at the cell centers of ``u``."""
    x = u.centers
    T = rearrangement_at(u, v, x)
    return MonotoneMap1D(x, T)


@dataclass
class ResidualReport:
    residuals: np.ndarray  # interior cells only
    max_residual: float
    l1_residual: float
    boundary_residuals: tuple  # first and last cell, one-sided stencils
    h: float

    def to_json(self) -> dict:
        return {
            "h": self.h,
            "max_residual": self.max_residual,
            "l1_residual": self.l1_residual,
            "boundary_residuals": list(self.boundary_residuals),
        }


def ma_residual(T: MonotoneMap1D, u: Density1D, v: Density1D) -> ResidualReport:
    """``r_i = T'(x_i) v(T(x_i)) - u(x_i)`` with central differences for ``T'``.

    The first and last cells use one-sided stencils; they are reported
    separately and left out of the max and L1 statistics.
    """
    if T.T.shape[0] != u.n:
        raise ValidationError("map is not defined on the density's grid")
    slack = 1e-12 * (v.b - v.a)
    if T.T.min() < v.a - slack or T.T.max() > v.b + slack:
        raise OutOfRange("map leaves the target interval")
    h = u.h
    dT = np.gradient(T.T, h, edge_order=1)
    r = dT * v(T.T) - u.values
    inner = r[1:-1] if u.n > 2 else r[:0]
    return ResidualReport(
        residuals=inner,
        max_residual=float(np.abs(inner).max(initial=0.0)),
        l1_residual=float(np.abs(inner).sum() * h),
        boundary_residuals=(float(r[0]), float(r[-1])),
        h=h,
    )


def refinement_study(u_fn, v_fn, a, b, c, d, sizes):
    """Max interior residual at each grid size and the ratios between consecutive sizes."""
    res = []
    for n in sizes:
        u = Density1D.from_function(u_fn, a, b, n)
        v = Density1D.from_function(v_fn, c, d, n)
        res.append(ma_residual(monotone_rearrangement(u, v), u, v).max_residual)
    ratios = [res[k] / res[k + 1] if res[k + 1] > 0 else float("nan") for k in range(len(res) - 1)]
    return res, ratios


def quantile_atoms(u: Density1D, n_atoms: int):
    """``n_atoms`` equal-mass atoms at the mid-quantiles ``(k + 1/2) / n``."""
    q = (np.arange(n_atoms) + 0.5) / n_atoms
    return u.quantile(q)


@dataclass
class ConsistencyReport:
    sup_distance: float
    n_atoms: int
    x: np.ndarray
    T_lp: np.ndarray
    T_rearr: np.ndarray


def brenier_consistency(u: Density1D, v: Density1D, n_atoms: int) -> ConsistencyReport:
    """Compare the quadratic-cost LP map on quantile atoms with the rearrangement."""
    if n_atoms < 2:
        raise ValidationError("need at least two atoms")
    xs = quantile_atoms(u, n_atoms)
    ys = quantile_atoms(v, n_atoms)
    mu = new_discrete(xs[:, None])
    nu = new_discrete(ys[:, None])
    C = cost_matrix(CostSpec("scaled_power", 2), mu.points, nu.points)
    plan = solve_primal(mu, nu, C)
    T = extract_map(plan)
    if not isinstance(T, np.ndarray):
        raise ValidationError("LP plan on equal-mass atoms split mass")
    x = mu.points[:, 0]
    T_lp = T[:, 0]
    T_re = rearrangement_at(u, v, x)
    return ConsistencyReport(float(np.abs(T_lp - T_re).max()), n_atoms, x, T_lp, T_re)


@dataclass
class MonotonicityReport:
    holds: bool
    max_violation: float
    monotone_support: bool | None = None  # 1D quadratic only
    agrees: bool | None = None


def cyclical_monotonicity_check(plan: TransportPlan, spec: CostSpec, tol: float = 1e-9) -> MonotonicityReport:
    """Pairwise exchange test ``c(x,y) + c(x',y') <= c(x,y') + c(x',y)`` on the support.

    In 1D with quadratic cost this is equivalent to a monotone support,
    which is checked independently and cross-validated.
    """
    X = plan.mu.points[plan.src]
    Y = plan.nu.points[plan.tgt]
    C_xy = cost_matrix(spec, X, Y)
    diag = np.diag(C_xy)
    excess = diag[:, None] + diag[None, :] - C_xy - C_xy.T
    worst = float(excess.max(initial=0.0))
    rep = MonotonicityReport(worst <= tol, max(worst, 0.0))
    if plan.mu.dim == 1 and spec.p == 2:
        x, y = X[:, 0], Y[:, 0]
        dx = x[:, None] - x[None, :]
        dy = y[:, None] - y[None, :]
        scale = max(1.0, float(np.abs(np.concatenate([x, y])).max()))
        # strictly crossing pairs: x < x' but y > y'
        crossing = (dx < 0) & (dy > 1e-12 * scale)
        rep.monotone_support = not bool(crossing.any())
        rep.agrees = rep.monotone_support == rep.holds
    return rep
