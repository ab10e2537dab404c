"""Cost functions, cost matrices and the c-transform."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import DimensionMismatch, EmptyDomain, InfiniteExponent, InvalidExponent, ValidationError

KINDS = ("power", "scaled_power", "convex")


@dataclass(frozen=True)
class ConvexProfile:
    """Strictly convex ``h`` with closed-form Legendre transform and ``grad h*``."""

    name: str
    p: float  # h(z) = |z|^p / p

    def h(self, z):
        z = np.asarray(z, dtype=float)
        return np.linalg.norm(np.atleast_2d(z), axis=-1) ** self.p / self.p

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def h_star(self, w):
        w = np.asarray(w, dtype=float)
        return np.linalg.norm(np.atleast_2d(w), axis=-1) ** self.q / self.q

    def grad_h_star(self, w):
        """``|w|^(q-2) w`` for ``1/p + 1/q = 1``."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        r = np.linalg.norm(w, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, r ** (self.q - 2.0), 0.0)
        return scale * w


def convex_profile(h_id: str, p: float | None = None) -> ConvexProfile:
    if h_id == "quadratic":
        return ConvexProfile("quadratic", 2.0)
    if h_id == "p_power":
        if p is None or not p > 1:
            raise InvalidExponent("p-power profile needs p > 1")
        return ConvexProfile("p_power", float(p))
    raise ValidationError(f"unregistered convex profile {h_id!r}")


@dataclass(frozen=True)
class CostSpec:
    """``power``: |x-y|^p; ``scaled_power``: |x-y|^p / p; ``convex``: h(x-y)."""

    kind: str = "power"
    p: float = 1.0
    h: str | None = None
    profile: ConvexProfile | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown cost kind {self.kind!r}")
        if self.kind == "convex":
            prof = convex_profile(self.h or "quadratic", self.p if self.h == "p_power" else None)
            object.__setattr__(self, "profile", prof)
            object.__setattr__(self, "p", prof.p)
        elif not (self.p >= 1):
            raise InvalidExponent(f"cost exponent must be >= 1, got {self.p}")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.p)

    @property
    def is_distance(self) -> bool:
        return self.kind in ("power", "scaled_power") and self.p == 1

    @classmethod
    def from_json(cls, obj: dict) -> "CostSpec":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ValidationError("cost spec must be an object with a 'kind' field")
        kind = obj["kind"]
        if kind == "convex":
            return cls("convex", p=float(obj.get("p", 2.0)), h=obj.get("h", "quadratic"))
        p = obj.get("p", 1)
        p = math.inf if p in ("inf", "Infinity") else float(p)
        return cls(kind, p=p)

    def to_json(self) -> dict:
        if self.kind == "convex":
            out = {"kind": "convex", "h": self.profile.name}
            if self.profile.name == "p_power":
                out["p"] = self.p
            return out
        return {"kind": self.kind, "p": "inf" if self.is_infinite else self.p}

    def of_distance(self, d):
        """Cost as a function of the Euclidean distance ``|x - y|``."""
        d = np.asarray(d, dtype=float)
        if self.p == 1:
            c = d.copy()
        elif self.p == 2:
            c = d * d
        elif float(self.p).is_integer():
            c = d ** int(self.p)
        else:
            # exp/log with the zero-distance guard
            with np.errstate(divide="ignore"):
                c = np.where(d > 0, np.exp(self.p * np.log(np.where(d > 0, d, 1.0))), 0.0)
        if self.kind in ("scaled_power", "convex"):
            c = c / self.p
        return c

    def __call__(self, x, y) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return float(self.of_distance(np.linalg.norm(x - y)))


def _pts(X) -> np.ndarray:
    if hasattr(X, "points"):
        X = X.points
    a = np.asarray(X, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    return a


def distance_matrix(X, Y) -> np.ndarray:
    X, Y = _pts(X), _pts(Y)
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"dimension {X.shape[1]} vs {Y.shape[1]}")
    diff = X[:, None, :] - Y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def cost_matrix(spec: CostSpec, X, Y) -> np.ndarray:
    """Dense matrix ``C[i, j] = c(X[i], Y[j])``."""
    if spec.is_infinite:
        raise InfiniteExponent("p = inf has no cost matrix; use solver.solve_bottleneck")
    return spec.of_distance(distance_matrix(X, Y))


@dataclass(frozen=True)
class CTransform:
    """Result of a c-transform onto ``Y``.

    ``argmins[j]`` holds every index of ``X`` attaining the minimum at ``Y[j]``.
    """

    values: np.ndarray
    argmins: tuple

    @property
    def has_ties(self) -> bool:
        return any(len(a) > 1 for a in self.argmins)


def _exact(a) -> np.ndarray:
    """Object array of Fractions holding the exact binary values of ``a``."""
    a = np.asarray(a)
    if a.dtype == object:
        return a
    out = np.empty(a.shape, dtype=object)
    out.flat[:] = [Fraction(float(v)) for v in a.flat]
    return out


def c_transform_full(chi, spec: CostSpec, X, Y, C: np.ndarray | None = None, exact: bool = False) -> CTransform:
    if C is None:
        C = cost_matrix(spec, X, Y)
    if exact:
        chi = _exact(np.asarray(chi).reshape(-1))
        C = _exact(C)
    else:
        chi = np.asarray(chi, dtype=float).reshape(-1)
        if not np.all(np.isfinite(chi)):
            raise ValidationError("potential must be finite")
    if chi.size == 0:
        raise EmptyDomain("c-transform over an empty set")
    if C.shape[0] != chi.size:
        raise DimensionMismatch(f"{chi.size} potential values for {C.shape[0]} points")
    S = C - chi[:, None]
    vals = S.min(axis=0)
    ties = tuple(tuple(np.flatnonzero(S[:, j] == vals[j]).tolist()) for j in range(S.shape[1]))
    return CTransform(vals, ties)


def c_transform(chi, spec: CostSpec, X, Y, C: np.ndarray | None = None, exact: bool = False) -> np.ndarray:
    """``chi^c(y) = min_x c(x, y) - chi(x)`` for every ``y`` in ``Y``.

    With ``exact=True`` the cost entries and ``chi`` are lifted to
    :class:`~fractions.Fraction` and the result is an object array of
    Fractions, so chained transforms incur no rounding at all.
    """
    return c_transform_full(chi, spec, X, Y, C, exact).values


def lipschitz_constant(values, Y) -> float:
    """Largest difference quotient ``|f(y) - f(y')| / |y - y'|`` over distinct pairs."""
    Y = _pts(Y)
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0
    D = distance_matrix(Y, Y)
    dv = np.abs(values[:, None] - values[None, :])
    mask = D > 0
    return float((dv[mask] / D[mask]).max()) if mask.any() else 0.0


def _collinear_triples(Y, tol=1e-12):
    """Index triples ``(a, m, b)`` with ``Y[m]`` strictly between ``Y[a]`` and ``Y[b]`` on a line."""
    Y = _pts(Y)
    for a, b in combinations(range(len(Y)), 2):
        seg = Y[b] - Y[a]
        L2 = float(seg @ seg)
        if L2 == 0:
            continue
        rel = Y - Y[a]
        t = rel @ seg / L2
        resid = np.linalg.norm(rel - np.outer(t, seg), axis=1)
        for m in np.flatnonzero((resid <= tol * (1 + math.sqrt(L2))) & (t > tol) & (t < 1 - tol)):
            yield a, int(m), b, float(t[m])


@dataclass
class ConcavityReport:
    is_c_concave: bool
    max_deviation: float
    lipschitz: float | None = None  # p = 1 characterization
    quadratic_convex: bool | None = None  # p = 2 characterization


def c_concavity_check(psi, spec: CostSpec, X, Y, tol: float = 1e-12) -> ConcavityReport:
    """Whether ``psi`` on ``Y`` equals its double c-transform (through ``X``).

    For p = 1 the discrete Lipschitz constant is reported as well; for
    p = 2 the convexity of ``|y|^2/2 - psi`` along collinear triples of
    ``Y``, which holds for every c-concave ``psi`` under ``|x-y|^2/2``.
    """
    psi = np.asarray(psi, dtype=float)
    C = cost_matrix(spec, X, Y)
    psi_c = c_transform(psi, spec, Y, X, C.T)  # on X
    psi_cc = c_transform(psi_c, spec, X, Y, C)  # back on Y
    dev = float(np.max(np.abs(psi_cc - psi)))
    rep = ConcavityReport(dev <= tol, dev)
    if spec.kind != "convex" and spec.p == 1:
        rep.lipschitz = lipschitz_constant(psi, Y)
    if spec.p == 2:
        Yp = _pts(Y)
        # |x-y|^2 = 2 * (|x-y|^2 / 2), so the convex part doubles for "power"
        half = 1.0 if spec.kind == "power" else 0.5
        g = half * np.einsum("ij,ij->i", Yp, Yp) - psi
        ok = True
        for a, m, b, t in _collinear_triples(Yp):
            if g[m] > (1 - t) * g[a] + t * g[b] + max(tol, 1e-12):
                ok = False
                break
        rep.quadratic_convex = ok
    return rep
