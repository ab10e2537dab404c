"""Finitely supported probability measures on R^d."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, EmptySupport, InvalidExponent, NegativeWeight

MERGE_TOL = 1e-12
DROP_TOL = 1e-15
NEG_TOL = 1e-15
SUM_TOL = 1e-14

PointMap = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure ``sum_i weights[i] * delta_{points[i]}``.

    Build instances through :func:`new_discrete`; the constructor itself
    performs no normalization or merging.
    """

    points: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.size

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """``sum_i w_i fn(x_i)``; ``fn`` maps an (n, d) array to (n,)."""
        return float(np.dot(self.weights, fn(self.points)))

    def same_as(self, other: "DiscreteMeasure", tol: float = 1e-12) -> bool:
        """Equality as measures (order of atoms ignored)."""
        if self.dim != other.dim or self.size != other.size:
            return False
        a = np.lexsort(self.points.T[::-1])
        b = np.lexsort(other.points.T[::-1])
        return bool(
            np.allclose(self.points[a], other.points[b], rtol=0, atol=tol)
            and np.allclose(self.weights[a], other.weights[b], rtol=0, atol=tol)
        )

    def __repr__(self) -> str:
        return f"DiscreteMeasure(n={self.size}, dim={self.dim})"


def _as_points(points) -> np.ndarray:
    try:
        arr = np.asarray(points, dtype=float)
    except ValueError as exc:  # ragged input
        raise DimensionMismatch("points must all have the same dimension") from exc
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"points must be a list of vectors, got shape {arr.shape}")
    return arr


def merge_duplicates(points: np.ndarray, weights: np.ndarray, tol: float = MERGE_TOL):
    """Merge atoms closer than ``tol`` in max-norm; first occurrence keeps its position."""
    n = points.shape[0]
    if n < 2:
        return points, weights
    pairs = cKDTree(points).query_pairs(r=tol, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return points, weights
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n)])
    keep = np.unique(roots)
    remap = {r: k for k, r in enumerate(keep)}
    merged = np.zeros(len(keep))
    np.add.at(merged, [remap[r] for r in roots], weights)
    return points[keep], merged


def new_discrete(points: Sequence, weights: Sequence | None = None) -> DiscreteMeasure:
    """Validated, normalized, duplicate-free measure.

    ``weights=None`` means uniform weights.
    """
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise EmptySupport("a measure needs at least one atom")
    if not np.all(np.isfinite(pts)):
        raise DimensionMismatch("points must be finite")
    if weights is None:
        w = np.ones(pts.shape[0])
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != pts.shape[0]:
        raise DimensionMismatch(f"{pts.shape[0]} points but {w.shape[0]} weights")
    if not np.all(np.isfinite(w)):
        raise NegativeWeight("weights must be finite")
    if np.any(w < -NEG_TOL):
        raise NegativeWeight(f"negative weight {w.min()!r}")
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise EmptySupport("total mass must be positive")
    # already-normalized input is kept bit-for-bit so serialization round trips
    if abs(total - 1.0) > SUM_TOL:
        w = w / total
    keep = w >= DROP_TOL
    if not keep.all():
        pts, w = pts[keep], w[keep] / w[keep].sum()
    n = pts.shape[0]
    pts, w = merge_duplicates(pts, w)
    if pts.shape[0] != n:
        w = w / w.sum()
    return DiscreteMeasure(_frozen(pts), _frozen(w))


def dirac(x, dim: int | None = None) -> DiscreteMeasure:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if dim is not None and x.shape[0] != dim:
        raise DimensionMismatch(f"expected {dim} coordinates")
    return new_discrete([x], [1.0])


def _apply_map(m: DiscreteMeasure, T: PointMap) -> np.ndarray:
    if callable(T):
        out = np.asarray(T(m.points), dtype=float)
    else:
        out = np.asarray(T, dtype=float)
    if out.ndim == 1:
        if out.shape[0] != m.size:
            raise DimensionMismatch("point map must have one image per atom")
        out = out.reshape(-1, 1)
    if out.shape[0] != m.size:
        raise DimensionMismatch("point map must have one image per atom")
    if out.shape[1] != m.dim:
        raise DimensionMismatch(f"point map outputs dimension {out.shape[1]}, expected {m.dim}")
    return out


def pushforward(m: DiscreteMeasure, T: PointMap) -> DiscreteMeasure:
    """Image measure ``T#m``.

    ``T`` is either an (n, d) array of images, one per atom of ``m``, or a
    vectorized callable taking the (n, d) support and returning images.
    """
    return new_discrete(_apply_map(m, T), m.weights)


def moment_p(m: DiscreteMeasure, p: float) -> float:
    if not p >= 1:
        raise InvalidExponent(f"moment exponent must be >= 1, got {p}")
    r = np.linalg.norm(m.points, axis=1)
    return float(np.dot(m.weights, r**p))


def dilate(m: DiscreteMeasure, lam: float) -> DiscreteMeasure:
    return pushforward(m, m.points * lam)


def translate(m: DiscreteMeasure, z) -> DiscreteMeasure:
    return pushforward(m, m.points + np.asarray(z, dtype=float))


def product_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure):
    """The independent coupling ``mu (x) nu``."""
    from .solver import TransportPlan

    I, J = np.meshgrid(np.arange(mu.size), np.arange(nu.size), indexing="ij")
    mass = np.outer(mu.weights, nu.weights)
    plan = TransportPlan(I.ravel(), J.ravel(), mass.ravel(), mu, nu)
    plan.check_marginals(1e-12)
    return plan
