"""Exact Kirchhoff-index metrics and greedy-guarantee bounds.

All pair metrics read off the maintained dense state in O(1):
effective resistance from L+, squared biharmonic distance from (L+)^2,
and the closed-form marginal decrease combining the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

from .graph import Graph, GraphError
from .linalg import DenseSpectralState, fiedler_value, pseudo_inverse


def kirchhoff_index(state):
    """n * trace(L+): the sum of effective resistances over all pairs."""
    return state.n * float(np.trace(state.Lp))


def effective_resistance(state, u, v):
    if u == v:
        raise GraphError("effective resistance needs two distinct nodes")
    Lp = state.Lp
    return float(Lp[u, u] + Lp[v, v] - 2.0 * Lp[u, v])


def biharmonic_sq(state, u, v):
    """Squared biharmonic distance: b^T (L+)^2 b for b = e_u - e_v."""
    if u == v:
        raise GraphError("biharmonic distance needs two distinct nodes")
    Lp2 = state.Lp2
    return float(Lp2[u, u] + Lp2[v, v] - 2.0 * Lp2[u, v])


def marginal_decrease(state, edge):
    """Exact drop of the Kirchhoff index caused by inserting ``edge``:
    n * b^T (L+)^2 b / (1 + b^T L+ b).
    """
    u, v = state.check_candidate(*edge)
    return state.n * biharmonic_sq(state, u, v) / (
        1.0 + effective_resistance(state, u, v)
    )


def gradient(state, edge):
    """Sensitivity of the Kirchhoff index to ``edge``'s weight, up to the
    constant factor n: b^T (L+)^2 b.  Shares its argmax with the n-scaled
    form.
    """
    u, v = state.check_candidate(*edge)
    return biharmonic_sq(state, u, v)


# ---------------------------------------------------------------------------
# greedy guarantee bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """Spectral bounds feeding the greedy approximation guarantee.

    ``ratio_lb`` is the (1 - exp(-alpha*gamma)) / alpha guarantee evaluated
    at the bound values; it degrades gracefully to ``gamma_lb`` as the
    curvature bound approaches zero (complete graphs).
    """

    lambda2: float
    gamma_lb: float
    alpha_ub: float
    ratio_lb: float
    exact: bool


def guarantee_ratio(gamma, alpha):
    """(1 - e^(-alpha*gamma)) / alpha, with the alpha -> 0 limit."""
    if alpha < 1e-12:
        return gamma
    return -math.expm1(-alpha * gamma) / alpha


def spectral_bounds(graph, guard=20_000):
    """Bounds on the submodularity ratio and curvature of the decrease
    function, both driven by the algebraic connectivity.
    """
    if graph.n > guard:
        raise GraphError(f"n={graph.n} exceeds the bound-report guard ({guard})")
    if not graph.is_connected():
        raise GraphError("spectral bounds require a connected graph")
    lam2, exact = fiedler_value(graph)
    ratio = (lam2 / graph.n) ** 2
    gamma_lb = min(ratio, 1.0)
    alpha_ub = max(1.0 - ratio, 0.0)
    return BoundReport(lam2, gamma_lb, alpha_ub, guarantee_ratio(gamma_lb, alpha_ub), exact)


# ---------------------------------------------------------------------------
# exact enumeration of the set-function constants (tiny graphs only)
# ---------------------------------------------------------------------------

def _decrease_table(graph):
    """K(G) - K(G+S) for every subset S of candidate pairs. Exponential."""
    base = pseudo_inverse(graph)
    k0 = kirchhoff_index(base)
    cand = [
        (u, v)
        for u in range(graph.n)
        for v in range(u + 1, graph.n)
        if not graph.has_edge(u, v)
    ]
    table = {}
    for r in range(len(cand) + 1):
        for subset in combinations(range(len(cand)), r):
            st = base.copy()
            for idx in subset:
                st.add_edge(cand[idx])
            table[frozenset(subset)] = k0 - kirchhoff_index(st)
    return cand, table


def submodularity_ratio_exact(graph, max_n=6):
    """Exact submodularity ratio of the decrease function by enumeration.

    Intended for verification on tiny graphs only; cost is exponential in
    the candidate count.
    """
    if graph.n > max_n:
        raise GraphError(f"exact enumeration limited to n <= {max_n}")
    cand, f = _decrease_table(graph)
    idx = range(len(cand))
    best = 1.0
    subsets = [frozenset(s) for r in range(len(cand) + 1) for s in combinations(idx, r)]
    for H in subsets:
        for T in subsets:
            if not (H < T):
                continue
            gain = f[T] - f[H]
            if gain <= 1e-12:
                continue
            single = sum(f[H | {e}] - f[H] for e in T - H)
            best = min(best, single / gain)
    return best


def curvature_exact(graph, max_n=6):
    """Exact curvature of the decrease function by enumeration (tiny graphs)."""
    if graph.n > max_n:
        raise GraphError(f"exact enumeration limited to n <= {max_n}")
    cand, f = _decrease_table(graph)
    idx = range(len(cand))
    subsets = [frozenset(s) for r in range(len(cand) + 1) for s in combinations(idx, r)]
    worst = 0.0
    for H in subsets:
        for T in subsets:
            if not (H <= T):
                continue
            for e in H:
                lhs = f[T] - f[T - {e}]
                rhs = f[H] - f[H - {e}]
                if rhs <= 1e-12:
                    continue
                worst = max(worst, 1.0 - lhs / rhs)
    return worst
