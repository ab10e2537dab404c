"""Internal, potential and interaction energies and their convexity along geodesics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotAbsolutelyContinuous, ValidationError
from .geodesics import geodesic_path
from .measures import DiscreteMeasure, new_discrete

NORM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Cell values on a uniform 1D or 2D grid; cell ``i`` spans ``origin + h*[i, i+1]``."""

    origin: np.ndarray
    h: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        origin = np.atleast_1d(np.asarray(self.origin, dtype=float))
        if vals.ndim not in (1, 2):
            raise ValidationError("grids are 1D or 2D")
        if origin.shape != (vals.ndim,):
            raise DimensionMismatch(f"origin of dimension {origin.size} for a {vals.ndim}D grid")
        if not self.h > 0:
            raise ValidationError(f"grid spacing must be positive, got {self.h}")
        if not np.all(np.isfinite(vals)) or vals.min() < 0:
            raise ValidationError("cell values must be finite and non-negative")
        mass = vals.sum() * self.h**vals.ndim
        if abs(mass - 1.0) > NORM_TOL:
            raise ValidationError(f"density has mass {mass!r}, not 1")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "GridDensity":
        h = (b - a) / n
        return cls(np.array([a]), h, np.full(n, 1.0 / (b - a)))

    @classmethod
    def from_masses(cls, origin, h, masses) -> "GridDensity":
        masses = np.asarray(masses, dtype=float)
        return cls(origin, h, masses / (masses.sum() * h**masses.ndim))

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def counts(self) -> tuple:
        return self.values.shape

    @property
    def centers(self) -> np.ndarray:
        axes = [self.origin[a] + self.h * (np.arange(n) + 0.5) for a, n in enumerate(self.counts)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def to_atoms(self) -> DiscreteMeasure:
        return new_discrete(self.centers, self.values.ravel() * self.h**self.dim)

    def edges(self) -> np.ndarray:
        if self.dim != 1:
            raise ValidationError("edges are defined for 1D grids only")
        return self.origin[0] + self.h * np.arange(self.counts[0] + 1)

    def cdf_nodes(self) -> np.ndarray:
        F = np.concatenate([[0.0], np.cumsum(self.values) * self.h])
        return F / F[-1]


# registered families ---------------------------------------------------------

_LOG_GRID = np.logspace(-6, 6, 61)


@dataclass(frozen=True)
class Integrand:
    """``power``: u^m (m >= 1); ``entropy``: u log u extended by 0 at 0."""

    family: str
    m: float = 2.0

    def __post_init__(self):
        if self.family == "power":
            if not self.m >= 1:
                raise ValidationError(f"power integrand needs m >= 1, got {self.m}")
        elif self.family != "entropy":
            raise ValidationError(f"unregistered integrand family {self.family!r}")
        # numeric sanity of the registered formula on a log grid
        u = np.concatenate([[0.0], _LOG_GRID])
        fu = self(u)
        if fu[0] != 0.0:
            raise ValidationError("integrand must vanish at 0")
        dd = np.diff(np.diff(fu) / np.diff(u))
        if dd.min() < -1e-9 * (1 + np.abs(fu).max()):
            raise ValidationError("integrand is not convex on the check grid")

    @property
    def superlinear(self) -> bool:
        return self.family == "entropy" or self.m > 1

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "power":
            return u**self.m
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)

    def to_json(self) -> dict:
        return {"family": "power", "m": self.m} if self.family == "power" else {"family": "entropy"}


@dataclass(frozen=True, eq=False)
class Kernel:
    """Convex ``V`` or ``w``: ``power`` is |x|^q (q >= 1), ``quadratic`` is (x-c)^T A (x-c), A PSD."""

    family: str
    q: float = 2.0
    A: np.ndarray | None = None
    center: np.ndarray | None = None

    def __post_init__(self):
        if self.family == "power":
            if not self.q >= 1:
                raise ValidationError(f"power kernel needs q >= 1, got {self.q}")
        elif self.family == "quadratic":
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            if A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
                raise ValidationError("quadratic kernel needs a symmetric matrix")
            if np.linalg.eigvalsh(A).min() < -1e-12:
                raise ValidationError("quadratic kernel matrix is not positive semidefinite")
            c = np.zeros(A.shape[0]) if self.center is None else np.asarray(self.center, dtype=float)
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "center", c)
        else:
            raise ValidationError(f"unregistered kernel family {self.family!r}")

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if self.family == "power":
            return np.linalg.norm(X, axis=1) ** self.q
        if X.shape[1] != self.A.shape[0]:
            raise DimensionMismatch(f"kernel of dimension {self.A.shape[0]} on {X.shape[1]}D points")
        Z = X - self.center
        return np.einsum("ij,jk,ik->i", Z, self.A, Z)

    def to_json(self) -> dict:
        if self.family == "power":
            return {"family": "power", "q": self.q}
        return {"family": "quadratic", "A": self.A.tolist(), "center": self.center.tolist()}


@dataclass(frozen=True)
class FunctionalSpec:
    variant: str  # J1, J2, J3
    f: Integrand | None = None
    V: Kernel | None = None
    w: Kernel | None = None

    def __post_init__(self):
        need = {"J1": "f", "J2": "V", "J3": "w"}.get(self.variant)
        if need is None:
            raise ValidationError(f"unknown functional variant {self.variant!r}")
        if getattr(self, need) is None:
            raise ValidationError(f"{self.variant} needs '{need}'")
        if self.variant == "J1" and not self.f.superlinear:
            raise ValidationError("J1 integrand must be superlinear")

    @classmethod
    def from_json(cls, obj: dict) -> "FunctionalSpec":
        if not isinstance(obj, dict) or "variant" not in obj:
            raise ValidationError("functional spec must be an object with a 'variant' field")
        v = obj["variant"]
        if v == "J1":
            f = obj.get("f") or {}
            return cls("J1", f=Integrand(f.get("family", ""), float(f.get("m", 2.0))))
        key = {"J2": "V", "J3": "w"}.get(v)
        if key is None:
            raise ValidationError(f"unknown functional variant {v!r}")
        k = obj.get(key) or {}
        kern = Kernel(k.get("family", ""), float(k.get("q", 2.0)), k.get("A"), k.get("center"))
        return cls(v, **{key: kern})

    def to_json(self) -> dict:
        out = {"variant": self.variant}
        if self.f is not None:
            out["f"] = self.f.to_json()
        if self.V is not None:
            out["V"] = self.V.to_json()
        if self.w is not None:
            out["w"] = self.w.to_json()
        return out


def eval_functional(spec: FunctionalSpec, m) -> float:
    """``J1 = sum f(u) h^d``; ``J2 = sum w_i V(x_i)``; ``J3 = sum w_i w_j w(x_i - x_j)``.

    J1 on an atomic measure is +inf; this raises
    :class:`NotAbsolutelyContinuous`, whose ``value`` attribute is ``inf``.
    """
    if spec.variant == "J1":
        if not isinstance(m, GridDensity):
            err = NotAbsolutelyContinuous("J1 is +inf on measures with atoms")
            err.value = math.inf
            raise err
        return float(spec.f(m.values).sum() * m.h**m.dim)
    if isinstance(m, GridDensity):
        m = m.to_atoms()
    if spec.variant == "J2":
        return float(np.dot(m.weights, spec.V(m.points)))
    diff = (m.points[:, None, :] - m.points[None, :, :]).reshape(-1, m.dim)
    W = spec.w(diff).reshape(m.size, m.size)
    return float(m.weights @ W @ m.weights)


# McCann's condition -----------------------------------------------------------


@dataclass
class McCannReport:
    holds: bool
    non_increasing: bool
    convex: bool
    superlinear: bool
    max_increase: float
    max_concavity: float


def mccann_condition_check(f: Integrand, d: int, r_grid) -> McCannReport:
    """Test ``g(r) = r^d f(r^-d)`` for being non-increasing and convex on ``r_grid``.

    ``holds`` covers those two properties only; ``superlinear`` flags the
    separate precondition on ``f``.
    """
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 5:
        raise ValidationError("need at least 5 grid points")
    if r.min() <= 0 or np.any(np.diff(r) <= 0):
        raise ValidationError("grid must be positive and strictly increasing")
    if r[-1] / r[0] < 100:
        raise ValidationError("grid must span at least two decades")
    if d < 1:
        raise ValidationError(f"dimension must be >= 1, got {d}")
    g = r**d * f(r ** (-float(d)))
    scale = 1.0 + np.abs(g)
    inc = np.diff(g) / scale[1:]
    # divided-difference convexity on consecutive triples
    t = (r[1:-1] - r[:-2]) / (r[2:] - r[:-2])
    chord = (1 - t) * g[:-2] + t * g[2:]
    conc = (g[1:-1] - chord) / scale[1:-1]
    mono = bool(inc.max() <= 1e-12)
    conv = bool(conc.max() <= 1e-12)
    return McCannReport(mono and conv, mono, conv, f.superlinear, float(max(inc.max(), 0.0)), float(max(conc.max(), 0.0)))


# displacement interpolation of 1D densities ---------------------------------


def _quantile_nodes(g: GridDensity):
    """Breakpoints ``(q_k, Q(q_k))`` of the piecewise-linear quantile function.

    Empty cells become jumps of ``Q``: the same ``q`` appears twice.
    """
    F = g.cdf_nodes()
    x = g.edges()
    keep = np.ones(F.size, bool)
    # drop interior edges strictly inside a run of empty cells
    flat = np.diff(F) == 0
    keep[1:-1] = ~(flat[:-1] & flat[1:])
    return F[keep], x[keep]


def _eval_quantile(qn, xn, q):
    """Right-continuous evaluation on the breakpoint table (jumps take the upper value)."""
    idx = np.searchsorted(qn, q, side="right") - 1
    idx = np.clip(idx, 0, qn.size - 2)
    q0, q1 = qn[idx], qn[idx + 1]
    x0, x1 = xn[idx], xn[idx + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(q1 > q0, (q - q0) / (q1 - q0), 1.0)
    return x0 + s * (x1 - x0)


def interpolate_1d(g0: GridDensity, g1: GridDensity, t: float):
    """Quantile function of the displacement interpolant as a breakpoint table.

    In 1D the interpolant's quantile is ``(1-t) Q0 + t Q1`` exactly, and both
    are piecewise linear in ``q`` for piecewise-constant densities.
    """
    q0, x0 = _quantile_nodes(g0)
    q1, x1 = _quantile_nodes(g1)
    qs = np.union1d(q0, q1)
    lo = (1 - t) * _eval_quantile(q0, x0, qs) + t * _eval_quantile(q1, x1, qs)
    # left limits at each q, for jumps in either quantile
    eps_side = []
    for qn, xn in ((q0, x0), (q1, x1)):
        idx = np.clip(np.searchsorted(qn, qs, side="left") - 1, 0, qn.size - 2)
        a, b = qn[idx], qn[idx + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(b > a, (qs - a) / (b - a), 1.0)
        eps_side.append(xn[idx] + s * (xn[idx + 1] - xn[idx]))
    left = (1 - t) * eps_side[0] + t * eps_side[1]
    left[0] = lo[0]
    # each q contributes (left limit, right value); jumps become flat q segments
    Q = np.stack([left, lo], axis=1).ravel()
    q = np.repeat(qs, 2)
    return q, Q


def project_to_grid(q, Q, origin: float, h: float, n: int) -> GridDensity:
    """Cell masses of the measure with quantile breakpoints ``(q, Q)`` on a uniform grid."""
    edges = origin + h * np.arange(n + 1)
    # CDF at the grid edges; on a flat Q segment (atom-free jump) q is constant
    cdf = np.interp(edges, Q, q, left=0.0, right=1.0)
    masses = np.diff(cdf)
    masses = np.clip(masses, 0.0, None)
    return GridDensity.from_masses(np.array([origin]), h, masses)


def common_grid(g0: GridDensity, g1: GridDensity):
    """Finest of the two spacings over the union of both supports."""
    h = min(g0.h, g1.h)
    a = min(g0.origin[0], g1.origin[0])
    b = max(g0.edges()[-1], g1.edges()[-1])
    n = int(math.ceil((b - a) / h - 1e-9))
    return a, h, n


@dataclass
class ConvexityTable:
    variant: str
    times: list
    values: list
    second_differences: list
    tol: float
    passed: bool
    h: float | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "times": self.times,
            "values": self.values,
            "second_differences": self.second_differences,
            "tol": self.tol,
            "passed": self.passed,
            "h": self.h,
            "notes": self.notes,
        }


J1_TOL_CONSTANT = 1.0


def convexity_report(spec: FunctionalSpec, mu, nu, p: float = 2.0, k: int = 11, tol: float | None = None) -> ConvexityTable:
    """Second differences of ``t -> F(mu_t)`` at ``k`` equispaced times.

    J2 and J3 use the McCann interpolation of the optimal plan for
    ``|x-y|^p``. J1 needs 1D grid densities at both ends; intermediate
    densities are exact monotone interpolants projected onto the common
    grid, and the default tolerance is ``J1_TOL_CONSTANT * h``.
    """
    if k < 5:
        raise ValidationError("need at least 5 samples")
    times = np.linspace(0.0, 1.0, k)
    notes = []
    h = None
    if spec.variant == "J1":
        for m in (mu, nu):
            if not isinstance(m, GridDensity):
                err = NotAbsolutelyContinuous("J1 is +inf on measures with atoms")
                err.value = math.inf
                raise err
            if m.dim != 1:
                raise ValidationError("J1 interpolation is implemented for 1D grids only")
        a, h, n = common_grid(mu, nu)
        F = [eval_functional(spec, project_to_grid(*interpolate_1d(mu, nu, t), a, h, n)) for t in times]
        if tol is None:
            tol = J1_TOL_CONSTANT * h
        if p not in (2, 2.0):
            notes.append("J1 convexity for p != 2 reported without a continuum guarantee")
    else:
        if isinstance(mu, GridDensity):
            mu = mu.to_atoms()
        if isinstance(nu, GridDensity):
            nu = nu.to_atoms()
        path = geodesic_path(mu, nu, p, k)
        F = [eval_functional(spec, m) for m in path.measures]
        if tol is None:
            tol = 1e-8 * (1 + max(abs(v) for v in F))
    F = [float(v) for v in F]
    sd = [F[i - 1] - 2 * F[i] + F[i + 1] for i in range(1, k - 1)]
    return ConvexityTable(spec.variant, times.tolist(), F, sd, float(tol), min(sd) >= -tol, h, notes)
