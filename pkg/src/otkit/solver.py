"""Exact discrete Kantorovich solver, dual potentials and optimality certificates.

The primal problem is solved by the network simplex method on the
bipartite transportation graph. A basis is a spanning tree on the
``m + n`` row/column nodes; its potentials are the dual variables.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .costs import CostSpec, cost_matrix, distance_matrix
from .errors import DimensionMismatch, InfeasibleMarginals, NonOptimalPlan
from .measures import DiscreteMeasure, new_discrete

FEAS_TOL = 1e-10
OPT_TOL = 1e-9
MASS_EPS = 1e-15


@dataclass(eq=False)
class TransportPlan:
    """Sparse coupling: entry ``k`` sends ``mass[k]`` from ``mu[src[k]]`` to ``nu[tgt[k]]``."""

    src: np.ndarray
    tgt: np.ndarray
    mass: np.ndarray
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    basis: tuple | None = field(default=None, repr=False)  # spanning-tree arcs, zero-mass ones included

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=int)
        self.tgt = np.asarray(self.tgt, dtype=int)
        self.mass = np.asarray(self.mass, dtype=float)

    @property
    def entries(self):
        return list(zip(self.src.tolist(), self.tgt.tolist(), self.mass.tolist()))

    def __len__(self):
        return len(self.mass)

    def dense(self) -> np.ndarray:
        G = np.zeros((self.mu.size, self.nu.size))
        np.add.at(G, (self.src, self.tgt), self.mass)
        return G

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.src, weights=self.mass, minlength=self.mu.size)

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.tgt, weights=self.mass, minlength=self.nu.size)

    def marginal_violation(self) -> float:
        return float(
            max(
                np.abs(self.row_sums() - self.mu.weights).max(),
                np.abs(self.col_sums() - self.nu.weights).max(),
            )
        )

    def check_marginals(self, tol: float = FEAS_TOL) -> None:
        err = self.marginal_violation()
        if err > tol:
            raise InfeasibleMarginals(f"marginal violation {err:.3e} exceeds {tol:.1e}")

    def cost(self, C: np.ndarray) -> float:
        return float(np.dot(self.mass, C[self.src, self.tgt]))

    def displacements(self) -> np.ndarray:
        return np.linalg.norm(self.nu.points[self.tgt] - self.mu.points[self.src], axis=1)

    def to_json(self, C: np.ndarray | None = None) -> dict:
        out = {"entries": [[i, j, m] for i, j, m in self.entries]}
        if C is not None:
            out["cost"] = self.cost(C)
        return out

    @classmethod
    def from_json(cls, obj: dict, mu: DiscreteMeasure, nu: DiscreteMeasure) -> "TransportPlan":
        rows = obj["entries"]
        if not rows:
            raise InfeasibleMarginals("empty plan")
        arr = np.asarray(rows, dtype=float)
        src, tgt = arr[:, 0].astype(int), arr[:, 1].astype(int)
        if src.min() < 0 or src.max() >= mu.size or tgt.min() < 0 or tgt.max() >= nu.size:
            raise DimensionMismatch("plan indices out of range for the given measures")
        return cls(src, tgt, arr[:, 2], mu, nu)


@dataclass
class DualPotentials:
    phi: np.ndarray  # on spt mu
    psi: np.ndarray  # on spt nu
    unique: bool = True  # False when the plan's support graph is disconnected
    components: int = 1

    def value(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        return float(np.dot(self.phi, mu.weights) + np.dot(self.psi, nu.weights))

    def to_json(self) -> dict:
        return {
            "phi": self.phi.tolist(),
            "psi": self.psi.tolist(),
            "unique": self.unique,
            "components": self.components,
        }


@dataclass
class OptimalityReport:
    primal_value: float
    dual_value: float
    gap: float
    max_constraint_violation: float  # dual feasibility: max(phi_i + psi_j - C_ij, 0)
    max_slackness_violation: float  # max |phi_i + psi_j - C_ij| over plan entries
    max_marginal_violation: float
    tol: float

    @property
    def optimal(self) -> bool:
        return (
            self.max_marginal_violation <= self.tol
            and self.max_constraint_violation <= self.tol
            and self.max_slackness_violation <= self.tol
            and abs(self.gap) <= self.tol
        )

    def to_json(self) -> dict:
        return {
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "max_constraint_violation": self.max_constraint_violation,
            "max_slackness_violation": self.max_slackness_violation,
            "max_marginal_violation": self.max_marginal_violation,
            "optimal": self.optimal,
        }


# ---------------------------------------------------------------------------
# network simplex


class _Basis:
    """Spanning tree on rows ``0..m-1`` and columns ``m..m+n-1`` with arc flows."""

    def __init__(self, C: np.ndarray, flow: np.ndarray, arcs):
        self.C = C
        self.m, self.n = C.shape
        self.flow = flow
        self.adj = [dict() for _ in range(self.m + self.n)]  # node -> {neighbor: (i, j)}
        for i, j in arcs:
            self.add(i, j)

    def add(self, i, j):
        r, c = i, self.m + j
        self.adj[r][c] = (i, j)
        self.adj[c][r] = (i, j)

    def remove(self, i, j):
        r, c = i, self.m + j
        del self.adj[r][c]
        del self.adj[c][r]

    def arcs(self):
        return sorted(a for r in range(self.m) for a in self.adj[r].values())

    def traverse(self):
        """BFS from row 0: parent, depth and potentials with ``u_i + v_j = C_ij`` on arcs."""
        N = self.m + self.n
        parent = [-1] * N
        depth = [-1] * N
        pot = np.zeros(N)
        depth[0] = 0
        C, m, adj = self.C, self.m, self.adj
        queue = deque([0])
        while queue:
            a = queue.popleft()
            pa = pot[a]
            for b, (i, j) in adj[a].items():
                if depth[b] < 0:
                    depth[b] = depth[a] + 1
                    parent[b] = a
                    pot[b] = C[i, j] - pa
                    queue.append(b)
        if min(depth) < 0:
            raise RuntimeError("basis is not a spanning tree")
        return parent, depth, pot[:m], pot[m:]

    def cycle(self, parent, depth, i, j):
        """Tree path from column ``j`` to row ``i`` as (arc, sign) pairs; sign -1 loses flow."""
        a, b = self.m + j, i
        up_a, up_b = [], []
        while depth[a] > depth[b]:
            up_a.append(a)
            a = parent[a]
        while depth[b] > depth[a]:
            up_b.append(b)
            b = parent[b]
        while a != b:
            up_a.append(a)
            up_b.append(b)
            a, b = parent[a], parent[b]
        nodes = up_a + [a] + up_b[::-1]
        out = []
        for k in range(len(nodes) - 1):
            arc = self.adj[nodes[k]][nodes[k + 1]]
            out.append((arc, -1 if k % 2 == 0 else 1))
        return out


def _least_cost_start(C: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Greedy cheapest-cell start. Each allocation retires one row or column, so
    the ``m + n - 1`` chosen cells always form a spanning tree (zero cells included)."""
    m, n = C.shape
    supply, demand = a.astype(float).copy(), b.astype(float).copy()
    row_open = np.ones(m, bool)
    col_open = np.ones(n, bool)
    rows_left, cols_left = m, n
    flow = np.zeros((m, n))
    arcs = []
    for k in np.argsort(C, axis=None, kind="stable"):
        i, j = divmod(int(k), n)
        if not (row_open[i] and col_open[j]):
            continue
        x = min(supply[i], demand[j])
        flow[i, j] = x
        arcs.append((i, j))
        if rows_left == 1 and cols_left == 1:
            break
        supply[i] -= x
        demand[j] -= x
        if (supply[i] <= demand[j] and rows_left > 1) or cols_left == 1:
            row_open[i] = False
            rows_left -= 1
            demand[j] = max(demand[j], 0.0)
        else:
            col_open[j] = False
            cols_left -= 1
            supply[i] = max(supply[i], 0.0)
    return flow, arcs


def _run_simplex(basis: _Basis, eps: float, max_iter: int, improve_tol: float | None = None):
    """Pivot to optimality. Dantzig entering rule (lowest index among most negative),
    switching to Bland's rule after a run of degenerate pivots.

    With ``improve_tol`` set, a pivot that lowers the cost by more than that
    raises :class:`NonOptimalPlan` (used when certifying a given plan).
    """
    C, flow = basis.C, basis.flow
    m, n = C.shape
    is_basic = np.zeros((m, n), bool)
    for i, j in basis.arcs():
        is_basic[i, j] = True
    degenerate_run, bland = 0, False
    for _ in range(max_iter):
        parent, depth, u, v = basis.traverse()
        R = C - u[:, None] - v[None, :]
        R[is_basic] = 0.0
        if bland:
            cand = np.flatnonzero(R.ravel() < -eps)
            if cand.size == 0:
                return u, v
            k = int(cand[0])
        else:
            k = int(np.argmin(R))
            if R.flat[k] >= -eps:
                return u, v
        i, j = divmod(k, n)
        path = basis.cycle(parent, depth, i, j)
        losing = [arc for arc, s in path if s < 0]
        theta = min(flow[arc] for arc in losing)
        leave = min(arc for arc in losing if flow[arc] == theta)
        if improve_tol is not None and theta * R.flat[k] < -improve_tol:
            raise NonOptimalPlan(
                f"exchange along a cycle lowers the cost by {-theta * R.flat[k]:.3e}"
            )
        if theta > 0:
            flow[i, j] += theta
            for arc, s in path:
                flow[arc] += s * theta
            degenerate_run, bland = 0, False
        else:
            degenerate_run += 1
            if degenerate_run > m + n:
                bland = True
        flow[leave] = 0.0
        basis.remove(*leave)
        basis.add(i, j)
        is_basic[leave] = False
        is_basic[i, j] = True
    raise RuntimeError(f"network simplex did not converge in {max_iter} pivots")


def _check_inputs(mu, nu, C):
    C = np.asarray(C, dtype=float)
    if C.shape != (mu.size, nu.size):
        raise DimensionMismatch(f"cost matrix {C.shape} does not match supports ({mu.size}, {nu.size})")
    if not np.all(np.isfinite(C)):
        raise DimensionMismatch("cost matrix must be finite")
    if abs(mu.weights.sum() - nu.weights.sum()) > FEAS_TOL:
        raise InfeasibleMarginals("total masses differ")
    return C


def _eps(C):
    return 1e-12 * float(np.abs(C).max(initial=0.0))


def _plan_from_flow(flow, basis: _Basis, mu, nu) -> TransportPlan:
    arcs = basis.arcs()
    pos = [(i, j) for i, j in arcs if flow[i, j] > MASS_EPS]
    src = np.array([i for i, _ in pos], dtype=int)
    tgt = np.array([j for _, j in pos], dtype=int)
    return TransportPlan(src, tgt, flow[src, tgt], mu, nu, basis=tuple(arcs))


def solve_primal(mu: DiscreteMeasure, nu: DiscreteMeasure, C, return_duals: bool = False):
    """Optimal vertex plan for ``min sum gamma_ij C_ij`` over couplings of ``mu`` and ``nu``.

    With ``return_duals=True`` also returns the basis potentials as
    :class:`DualPotentials` (same as :func:`extract_duals` on the result).
    """
    C = _check_inputs(mu, nu, C)
    flow, arcs = _least_cost_start(C, mu.weights, nu.weights)
    basis = _Basis(C, flow, arcs)
    m, n = C.shape
    u, v = _run_simplex(basis, _eps(C), max_iter=50 * (m + n) * max(m, n) + 1000)
    plan = _plan_from_flow(flow, basis, mu, nu)
    if return_duals:
        return plan, _duals_from(u, v, plan, C)
    return plan


def _component_labels(plan: TransportPlan) -> np.ndarray:
    """Root label per node (rows first, then columns) of the plan's support graph."""
    m = plan.mu.size
    parent = list(range(m + plan.nu.size))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in zip(plan.src.tolist(), plan.tgt.tolist()):
        a, b = find(i), find(m + j)
        if a != b:
            parent[max(a, b)] = min(a, b)
    return np.array([find(x) for x in range(len(parent))])


def _duals_from(u, v, plan, C=None) -> DualPotentials:
    """Normalize to ``phi[0] = 0``; every further support component is shifted
    as close to ``phi = 0`` on its first row as dual feasibility allows."""
    u, v = u - u[0], v + u[0]
    labels = _component_labels(plan)
    roots = list(dict.fromkeys(labels.tolist()))
    m = plan.mu.size
    if C is not None and len(roots) > 1:
        C = np.asarray(C, dtype=float)
        for r in roots[1:]:
            rows = labels[:m] == r
            cols = labels[m:] == r
            if not rows.any() or not cols.any():
                continue
            R = C - u[:, None] - v[None, :]
            hi = R[np.ix_(rows, ~cols)].min(initial=np.inf)
            lo = -R[np.ix_(~rows, cols)].min(initial=np.inf)
            t = min(max(-u[np.flatnonzero(rows)[0]], lo), hi)
            u[rows] += t
            v[cols] -= t
    comps = len(roots)
    return DualPotentials(u, v, unique=comps == 1, components=comps)


def _components(plan: TransportPlan) -> int:
    return len(set(_component_labels(plan).tolist()))


def _cancel_cycles(C, flow, arcs, tol):
    """Turn a support with cycles into a forest without changing the cost.

    A cycle with non-zero alternating cost means the plan can be improved.
    """
    m, n = C.shape
    adj = [dict() for _ in range(m + n)]
    forest = []

    def path(s, t):
        prev = {s: None}
        queue = deque([s])
        while queue:
            x = queue.popleft()
            if x == t:
                break
            for y in adj[x]:
                if y not in prev:
                    prev[y] = x
                    queue.append(y)
        if t not in prev:
            return None
        out, x = [], t
        while prev[x] is not None:
            out.append(adj[x][prev[x]])
            x = prev[x]
        return out[::-1]

    for i, j in arcs:
        p = path(m + j, i)
        if p is None:
            adj[i][m + j] = adj[m + j][i] = (i, j)
            forest.append((i, j))
            continue
        # cycle: (i, j) then the path col j -> row i; signs alternate starting with -1
        signs = [(-1 if k % 2 == 0 else 1) for k in range(len(p))]
        delta = C[i, j] + sum(s * C[a] for a, s in zip(p, signs))
        if abs(delta) > tol:
            raise NonOptimalPlan(f"plan support carries a cycle of net cost {delta:.3e}")
        # push flow against (i, j) until something empties
        cyc = [((i, j), -1)] + [(a, -s) for a, s in zip(p, signs)]
        theta = min(flow[a] for a, s in cyc if s < 0)
        for a, s in cyc:
            flow[a] += s * theta
        gone = min(a for a, s in cyc if s < 0 and flow[a] <= MASS_EPS)
        flow[gone] = 0.0
        if gone != (i, j):
            r, c = gone[0], m + gone[1]
            del adj[r][c], adj[c][r]
            forest.remove(gone)
            adj[i][m + j] = adj[m + j][i] = (i, j)
            forest.append((i, j))
    return forest


def _complete_tree(C, forest):
    """Add zero-mass arcs (smallest reduced cost first) until the forest spans."""
    m, n = C.shape
    N = m + n
    adj = [[] for _ in range(N)]
    for i, j in forest:
        adj[i].append((m + j, C[i, j]))
        adj[m + j].append((i, C[i, j]))
    comp = [-1] * N
    pot = np.zeros(N)
    k = 0
    for root in range(N):
        if comp[root] >= 0:
            continue
        comp[root] = k
        queue = deque([root])
        while queue:
            a = queue.popleft()
            for b, c in adj[a]:
                if comp[b] < 0:
                    comp[b] = k
                    pot[b] = c - pot[a]
                    queue.append(b)
        k += 1
    if k == 1:
        return list(forest)
    R = C - pot[:m, None] - pot[None, m:]
    parent = list(range(k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    arcs = list(forest)
    for idx in np.argsort(R, axis=None, kind="stable"):
        i, j = divmod(int(idx), n)
        a, b = find(comp[i]), find(comp[m + j])
        if a != b:
            parent[a] = b
            arcs.append((i, j))
            k -= 1
            if k == 1:
                break
    return arcs


def extract_duals(plan: TransportPlan, C, tol: float = OPT_TOL) -> DualPotentials:
    """Kantorovich potentials complementary to ``plan``.

    Uses the plan's own basis when it came from :func:`solve_primal`;
    otherwise the support is completed to a spanning tree and
    degenerate pivots are run until the potentials are dual feasible.
    Normalized so that ``phi[0] == 0``.
    """
    C = _check_inputs(plan.mu, plan.nu, C)
    if plan.basis is not None:
        basis = _Basis(C, plan.dense(), plan.basis)
        _, _, u, v = basis.traverse()
        R = C - u[:, None] - v[None, :]
        if R.min(initial=0.0) >= -max(_eps(C), 0.0) - tol:
            return _duals_from(u, v, plan, C)
    flow = plan.dense()
    order = sorted(zip(plan.src.tolist(), plan.tgt.tolist()))
    forest = _cancel_cycles(C, flow, order, tol)
    basis = _Basis(C, flow, _complete_tree(C, forest))
    m, n = C.shape
    u, v = _run_simplex(basis, _eps(C), max_iter=50 * (m + n) * max(m, n) + 1000, improve_tol=tol)
    return _duals_from(u, v, plan, C)


def dual_value(duals: DualPotentials, mu, nu) -> float:
    return duals.value(mu, nu)


def verify_optimality(plan: TransportPlan, duals: DualPotentials, C, tol: float = OPT_TOL) -> OptimalityReport:
    """Certificate check: marginals, dual feasibility, complementary slackness, zero gap."""
    C = np.asarray(C, dtype=float)
    if C.shape != (plan.mu.size, plan.nu.size) or duals.phi.shape[0] != C.shape[0] or duals.psi.shape[0] != C.shape[1]:
        raise DimensionMismatch("plan, potentials and cost matrix disagree in size")
    S = duals.phi[:, None] + duals.psi[None, :] - C
    primal = plan.cost(C)
    dual = duals.value(plan.mu, plan.nu)
    slack = np.abs(S[plan.src, plan.tgt])
    return OptimalityReport(
        primal_value=primal,
        dual_value=dual,
        gap=primal - dual,
        max_constraint_violation=float(max(S.max(), 0.0)),
        max_slackness_violation=float(slack.max(initial=0.0)),
        max_marginal_violation=plan.marginal_violation(),
        tol=tol,
    )


# ---------------------------------------------------------------------------
# maps


@dataclass
class SplitReport:
    """Sources whose mass is sent to more than one target."""

    splits: dict  # source index -> list of (target index, fraction)

    @property
    def sources(self):
        return sorted(self.splits)


def extract_map(plan: TransportPlan, mass_tol: float = MASS_EPS):
    """``(n, d)`` array of images if the plan is induced by a map, else a :class:`SplitReport`."""
    keep = plan.mass > mass_tol
    src, tgt, mass = plan.src[keep], plan.tgt[keep], plan.mass[keep]
    counts = np.bincount(src, minlength=plan.mu.size)
    if np.all(counts == 1):
        T = np.empty_like(plan.mu.points)
        T[src] = plan.nu.points[tgt]
        return T
    splits = {}
    rows = plan.mu.weights
    for i in np.flatnonzero(counts > 1):
        sel = src == i
        splits[int(i)] = [(int(j), float(mm / rows[i])) for j, mm in zip(tgt[sel], mass[sel])]
    return SplitReport(splits)


def reflect_plan(plan: TransportPlan, src_perm, tgt_perm) -> TransportPlan:
    """Image of ``plan`` under atom relabelings that preserve both marginals."""
    src_perm, tgt_perm = np.asarray(src_perm), np.asarray(tgt_perm)
    return TransportPlan(src_perm[plan.src], tgt_perm[plan.tgt], plan.mass.copy(), plan.mu, plan.nu)


def average_plans(plans) -> TransportPlan:
    """Uniform mixture of couplings between the same pair of measures."""
    G = sum(p.dense() for p in plans) / len(plans)
    src, tgt = np.nonzero(G > MASS_EPS)
    return TransportPlan(src, tgt, G[src, tgt], plans[0].mu, plans[0].nu)


# ---------------------------------------------------------------------------
# bottleneck (p = inf)


class _MaxFlow:
    """Dinic's algorithm with real capacities."""

    def __init__(self, N):
        self.N = N
        self.head = [[] for _ in range(N)]
        self.to, self.cap = [], []

    def edge(self, a, b, c):
        self.head[a].append(len(self.to))
        self.to.append(b)
        self.cap.append(c)
        self.head[b].append(len(self.to))
        self.to.append(a)
        self.cap.append(0.0)
        return len(self.to) - 2

    def run(self, s, t, eps=1e-13):
        total = 0.0
        to, cap, head = self.to, self.cap, self.head
        while True:
            level = [-1] * self.N
            level[s] = 0
            queue = deque([s])
            while queue:
                a = queue.popleft()
                for e in head[a]:
                    if cap[e] > eps and level[to[e]] < 0:
                        level[to[e]] = level[a] + 1
                        queue.append(to[e])
            if level[t] < 0:
                return total
            it = [0] * self.N

            def push(a, f):
                if a == t:
                    return f
                while it[a] < len(head[a]):
                    e = head[a][it[a]]
                    b = to[e]
                    if cap[e] > eps and level[b] == level[a] + 1:
                        got = push(b, min(f, cap[e]))
                        if got > 0:
                            cap[e] -= got
                            cap[e ^ 1] += got
                            return got
                    it[a] += 1
                return 0.0

            while True:
                f = push(s, math.inf)
                if f <= 0:
                    break
                total += f


def _feasible_at(D, a, b, t, scale):
    m, n = D.shape
    g = _MaxFlow(m + n + 2)
    s, sink = m + n, m + n + 1
    for i in range(m):
        g.edge(s, i, a[i] * scale)
    for j in range(n):
        g.edge(m + j, sink, b[j] * scale)
    arcs = {}
    for i, j in zip(*np.nonzero(D <= t)):
        arcs[(int(i), int(j))] = g.edge(int(i), m + int(j), math.inf)
    total = a.sum() * scale
    flow = g.run(s, sink)
    return flow >= total * (1 - 1e-12), g, arcs


def solve_bottleneck(mu: DiscreteMeasure, nu: DiscreteMeasure):
    """``(W_inf, plan)``: the smallest threshold admitting a coupling that only
    uses pairs at distance ``<= threshold``, found by binary search over the
    sorted pairwise distances with a max-flow feasibility test."""
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"dimension {mu.dim} vs {nu.dim}")
    D = distance_matrix(mu.points, nu.points)
    a, b = mu.weights, nu.weights
    scale = 1.0 / min(a.min(), b.min())
    cands = np.unique(D)
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible_at(D, a, b, cands[mid], scale)[0]:
            hi = mid
        else:
            lo = mid + 1
    ok, g, arcs = _feasible_at(D, a, b, cands[lo], scale)
    assert ok
    src, tgt, mass = [], [], []
    for (i, j), e in sorted(arcs.items()):
        f = g.cap[e ^ 1] / scale
        if f > MASS_EPS:
            src.append(i)
            tgt.append(j)
            mass.append(f)
    plan = TransportPlan(np.array(src), np.array(tgt), np.array(mass), mu, nu)
    value = float(plan.displacements().max())
    return value, plan


def optimal_cost(mu, nu, spec: CostSpec) -> float:
    C = cost_matrix(spec, mu.points, nu.points)
    return solve_primal(mu, nu, C).cost(C)
