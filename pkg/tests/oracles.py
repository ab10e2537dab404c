"""Independent reference computations used by the tests."""

from itertools import combinations

import numpy as np
from scipy.optimize import linprog


def _transport_constraints(m, n):
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n : (i + 1) * n] = 1
    for j in range(n):
        A[m + j, j::n] = 1
    return A


def lp_transport(a, b, C):
    """Optimal value of the transportation LP via HiGHS."""
    m, n = C.shape
    res = linprog(C.ravel(), A_eq=_transport_constraints(m, n), b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return res.fun


def lp_dual(a, b, C):
    """Optimal value of the dual LP ``max a.phi + b.psi`` s.t. ``phi_i + psi_j <= C_ij``."""
    m, n = C.shape
    A = _transport_constraints(m, n).T
    res = linprog(-np.concatenate([a, b]), A_ub=A, b_ub=C.ravel(), bounds=(None, None), method="highs")
    assert res.status == 0, res.message
    return -res.fun


def vertex_enumeration(a, b, C):
    """Minimum of the cost over all basic feasible solutions (tiny sizes only)."""
    m, n = C.shape
    A = _transport_constraints(m, n)[:-1]  # drop one redundant row
    rhs = np.concatenate([a, b])[:-1]
    best = np.inf
    for cols in combinations(range(m * n), m + n - 1):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        x = np.linalg.solve(B, rhs)
        if x.min() < -1e-12:
            continue
        best = min(best, float(C.ravel()[list(cols)] @ x))
    return best


def bottleneck_brute(a, b, D):
    """Smallest pairwise distance ``t`` for which an LP coupling supported on ``D <= t`` exists."""
    m, n = D.shape
    A = _transport_constraints(m, n)
    for t in np.unique(D):
        bounds = [(0, None) if d <= t else (0, 0) for d in D.ravel()]
        res = linprog(np.zeros(m * n), A_eq=A, b_eq=np.concatenate([a, b]), bounds=bounds, method="highs")
        if res.status == 0:
            return float(t)
    raise AssertionError("no feasible threshold")


def min_cost_flow_lp(edges, lengths, supply):
    """Uncapacitated min-cost flow on an undirected graph as an LP (two arcs per edge)."""
    N, E = len(supply), len(edges)
    A = np.zeros((N, 2 * E))
    for e, (u, v) in enumerate(edges):
        A[u, e], A[v, e] = 1, -1
        A[u, E + e], A[v, E + e] = -1, 1
    res = linprog(np.concatenate([lengths, lengths]), A_eq=A, b_eq=supply, bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return res.fun
