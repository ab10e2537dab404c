"""Minimal flows on grid graphs and their equivalence with W_1 for the graph metric."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBox, DisconnectedSupport, DimensionMismatch, MassMismatch, OutOfDomain, ValidationError
from .measures import DiscreteMeasure, new_discrete
from .solver import extract_duals, solve_primal

MASS_TOL = 1e-12
ZERO = 1e-15


@dataclass(frozen=True, eq=False)
class GridGraph:
    """Lattice nodes in row-major order; ``edges[e] = (u, v)`` with ``u < v``."""

    lo: np.ndarray
    hi: np.ndarray
    shape: tuple
    nodes: np.ndarray  # (N, d) coordinates
    edges: np.ndarray  # (E, 2) int
    lengths: np.ndarray  # (E,)
    diagonals: bool = False

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.asarray(self.shape) - 1)

    def adjacency(self) -> list:
        adj = [[] for _ in range(self.n_nodes)]
        for e, (u, v) in enumerate(self.edges):
            adj[u].append((v, e, 1))
            adj[v].append((u, e, -1))
        for lst in adj:
            lst.sort()
        return adj


def build_grid_graph(bbox, resolution, diagonals: bool = False) -> GridGraph:
    """Grid on the box ``bbox = [(lo, hi), ...]`` with ``resolution`` nodes per axis."""
    box = np.atleast_2d(np.asarray(bbox, dtype=float))
    if box.shape[1] != 2:
        raise DegenerateBox("bbox must be a list of (lo, hi) pairs")
    d = box.shape[0]
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (d,)).copy()
    if np.any(res < 2):
        raise DegenerateBox("need at least 2 nodes per axis")
    lo, hi = box[:, 0], box[:, 1]
    if not np.all(hi > lo):
        raise DegenerateBox("box has an empty side")
    if diagonals and d != 2:
        raise ValidationError("diagonal edges are defined for 2D grids")
    axes = [np.linspace(lo[a], hi[a], res[a]) for a in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    idx = np.arange(nodes.shape[0]).reshape(tuple(res))
    h = (hi - lo) / (res - 1)
    edges, lengths = [], []
    for a in range(d):
        sl_u = [slice(None)] * d
        sl_v = [slice(None)] * d
        sl_u[a] = slice(0, -1)
        sl_v[a] = slice(1, None)
        u, v = idx[tuple(sl_u)].ravel(), idx[tuple(sl_v)].ravel()
        edges.append(np.stack([u, v], axis=1))
        lengths.append(np.full(u.size, h[a]))
    if diagonals:
        diag = math.hypot(h[0], h[1])
        for u, v in ((idx[:-1, :-1], idx[1:, 1:]), (idx[:-1, 1:], idx[1:, :-1])):
            edges.append(np.stack([u.ravel(), v.ravel()], axis=1))
            lengths.append(np.full(u.size, diag))
    E = np.vstack(edges)
    E.sort(axis=1)
    L = np.concatenate(lengths)
    order = np.lexsort((E[:, 1], E[:, 0]))
    return GridGraph(lo, hi, tuple(int(r) for r in res), nodes, E[order], L[order], diagonals)


def snap_measure(m: DiscreteMeasure, g: GridGraph) -> np.ndarray:
    """Node weights; each atom goes to its nearest node, ties to the smaller index per axis."""
    if m.dim != len(g.shape):
        raise DimensionMismatch(f"{m.dim}D measure on a {len(g.shape)}D grid")
    slack = 1e-12 * (1 + np.abs(np.concatenate([g.lo, g.hi])).max())
    if np.any(m.points < g.lo - slack) or np.any(m.points > g.hi + slack):
        raise OutOfDomain("measure support leaves the grid box")
    t = (m.points - g.lo) / g.spacing
    k = np.clip(np.ceil(t - 0.5), 0, np.asarray(g.shape) - 1).astype(int)
    flat = np.ravel_multi_index(tuple(k.T), g.shape)
    w = np.zeros(g.n_nodes)
    np.add.at(w, flat, m.weights)
    return w


def shortest_paths(g: GridGraph, source: int, adj=None) -> np.ndarray:
    """Dijkstra from ``source``; the heap orders ties by node index."""
    adj = adj if adj is not None else g.adjacency()
    dist = np.full(g.n_nodes, math.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(g.n_nodes, bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, e, _ in adj[u]:
            nd = d + g.lengths[e]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def graph_distances(g: GridGraph, rows=None) -> np.ndarray:
    adj = g.adjacency()
    rows = range(g.n_nodes) if rows is None else rows
    return np.array([shortest_paths(g, int(s), adj) for s in rows])


@dataclass
class FlowField:
    graph: GridGraph
    flow: np.ndarray  # signed, positive means edges[e][0] -> edges[e][1]
    potential: np.ndarray | None = None

    @property
    def mass(self) -> float:
        return float(np.dot(np.abs(self.flow), self.graph.lengths))

    def divergence(self) -> np.ndarray:
        """Net outflow at each node."""
        div = np.zeros(self.graph.n_nodes)
        np.add.at(div, self.graph.edges[:, 0], self.flow)
        np.add.at(div, self.graph.edges[:, 1], -self.flow)
        return div

    def divergence_residual(self, mu_nodes, nu_nodes) -> np.ndarray:
        return np.abs(self.divergence() - (np.asarray(mu_nodes) - np.asarray(nu_nodes)))

    def to_json(self) -> dict:
        nz = np.flatnonzero(self.flow != 0)
        return {
            "edges": [[int(self.graph.edges[e, 0]), int(self.graph.edges[e, 1]), float(self.flow[e])] for e in nz],
            "mass": self.mass,
        }


def _check_balance(g, mu_nodes, nu_nodes):
    mu_nodes = np.asarray(mu_nodes, dtype=float)
    nu_nodes = np.asarray(nu_nodes, dtype=float)
    if mu_nodes.shape != (g.n_nodes,) or nu_nodes.shape != (g.n_nodes,):
        raise DimensionMismatch("node weights must have one entry per node")
    if mu_nodes.min() < 0 or nu_nodes.min() < 0:
        raise ValidationError("node weights must be non-negative")
    if abs(mu_nodes.sum() - nu_nodes.sum()) > MASS_TOL:
        raise MassMismatch(f"masses {mu_nodes.sum()!r} and {nu_nodes.sum()!r} differ")
    return mu_nodes, nu_nodes


def solve_beckmann(g: GridGraph, mu_nodes, nu_nodes) -> FlowField:
    """Minimize ``sum |flow_e| len_e`` subject to net outflow ``mu - nu`` at every node.

    Successive shortest paths: every undirected edge is a pair of opposite
    arcs of cost ``len``; node potentials keep reduced costs non-negative
    so each search is a Dijkstra run from all nodes with excess at once.
    """
    mu_nodes, nu_nodes = _check_balance(g, mu_nodes, nu_nodes)
    adj = g.adjacency()
    N = g.n_nodes
    excess = mu_nodes - nu_nodes
    flow = np.zeros(g.n_edges)
    pi = np.zeros(N)
    L = g.lengths
    tol = ZERO * (1 + np.abs(excess).max(initial=0.0))
    while True:
        sources = np.flatnonzero(excess > tol)
        if sources.size == 0 or not np.any(excess < -tol):
            break
        dist = np.full(N, math.inf)
        pred = np.full(N, -1)
        pred_edge = np.full(N, -1)
        heap = [(0.0, int(s)) for s in sources]
        dist[sources] = 0.0
        heapq.heapify(heap)
        done = np.zeros(N, bool)
        target = -1
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if excess[u] < -tol:
                target = u
                break
            for v, e, sgn in adj[u]:
                # moving along sgn * flow; opposing existing flow costs -len
                c = -L[e] if sgn * flow[e] < 0 else L[e]
                nd = d + max(c + pi[u] - pi[v], 0.0)
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = u
                    pred_edge[v] = e
                    heapq.heappush(heap, (nd, v))
        if target < 0:
            raise DisconnectedSupport("no path from an excess node to a deficit node")
        dt = dist[target]
        pi += np.minimum(dist, dt)
        # walk back to the source, collecting the bottleneck of cancelling arcs
        path = []
        v = target
        while pred[v] >= 0:
            u, e = pred[v], pred_edge[v]
            sgn = 1 if g.edges[e, 0] == u else -1
            path.append((e, sgn))
            v = u
        src = v
        delta = min(excess[src], -excess[target])
        for e, sgn in path:
            if sgn * flow[e] < 0:
                delta = min(delta, abs(flow[e]))
        for e, sgn in path:
            flow[e] += sgn * delta
            if abs(flow[e]) <= ZERO * delta:
                flow[e] = 0.0
        excess[src] -= delta
        excess[target] += delta
    # potentials from the search double as a 1-Lipschitz dual (up to sign)
    return FlowField(g, flow, pi)


@dataclass
class EquivalenceReport:
    beckmann_value: float
    kantorovich_value: float
    gap: float
    flow: FlowField

    def as_tuple(self):
        return self.beckmann_value, self.kantorovich_value, self.gap


def _node_measure(g, w):
    idx = np.flatnonzero(w > 0)
    return new_discrete(g.nodes[idx], w[idx]), idx


def kantorovich_on_nodes(g: GridGraph, mu_nodes, nu_nodes, D=None):
    """Optimal plan between node measures for the graph-distance cost."""
    mu_nodes, nu_nodes = _check_balance(g, mu_nodes, nu_nodes)
    mu, ia = _node_measure(g, mu_nodes)
    nu, ib = _node_measure(g, nu_nodes)
    if mu.size != ia.size or nu.size != ib.size:
        raise ValidationError("grid nodes must be distinct")
    if D is None:
        D = graph_distances(g, ia)
    else:
        D = D[ia]
    C = D[:, ib]
    plan = solve_primal(mu, nu, C)
    return plan, C, ia, ib, D


def equivalence_gap(g: GridGraph, mu_nodes, nu_nodes) -> EquivalenceReport:
    flow = solve_beckmann(g, mu_nodes, nu_nodes)
    plan, C, *_ = kantorovich_on_nodes(g, mu_nodes, nu_nodes)
    B = flow.mass
    K = plan.cost(C)
    return EquivalenceReport(B, K, abs(B - K), flow)


def kantorovich_potential_on_nodes(g: GridGraph, mu_nodes, nu_nodes) -> np.ndarray:
    """``phi(z) = min_j d(z, y_j) - psi_j`` from the solver's dual; 1-Lipschitz on the graph."""
    plan, C, ia, ib, _ = kantorovich_on_nodes(g, mu_nodes, nu_nodes)
    duals = extract_duals(plan, C)
    Dn = graph_distances(g, ib)  # rows: target nodes
    return (Dn - duals.psi[:, None]).min(axis=0)


@dataclass
class DualCheck:
    gradient_bound: float
    objective: float
    feasible: bool
    beckmann_value: float | None = None
    weak_duality: bool | None = None


def lipschitz_dual_check(g: GridGraph, mu_nodes, nu_nodes, phi, beckmann_value=None) -> DualCheck:
    """Discrete gradient bound of ``phi`` and its objective ``sum phi (mu - nu)``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (g.n_nodes,) or not np.all(np.isfinite(phi)):
        raise ValidationError("phi must be finite with one value per node")
    mu_nodes, nu_nodes = _check_balance(g, mu_nodes, nu_nodes)
    grad = np.abs(phi[g.edges[:, 0]] - phi[g.edges[:, 1]]) / g.lengths
    bound = float(grad.max(initial=0.0))
    obj = float(np.dot(phi, mu_nodes - nu_nodes))
    rep = DualCheck(bound, obj, bound <= 1 + 1e-12)
    if beckmann_value is None and rep.feasible:
        beckmann_value = solve_beckmann(g, mu_nodes, nu_nodes).mass
    if beckmann_value is not None:
        rep.beckmann_value = float(beckmann_value)
        if rep.feasible:
            rep.weak_duality = obj <= beckmann_value + 1e-9
    return rep
