"""Independent oracles for the test suite.

Everything here recomputes ground truth through a route different from the
library's: eigendecompositions and numpy.linalg.pinv instead of the rank-
completion Cholesky, pure-python BFS instead of csgraph, exhaustive scans
instead of maintained matrices.
"""

from __future__ import annotations

from collections import deque
from itertools import combinations

import numpy as np

from kirchopt.graph import Graph


def dense_laplacian(graph):
    L = np.zeros((graph.n, graph.n))
    for u, v in zip(graph.edges_u, graph.edges_v):
        L[u, u] += 1
        L[v, v] += 1
        L[u, v] -= 1
        L[v, u] -= 1
    return L


def pinv_oracle(graph):
    return np.linalg.pinv(dense_laplacian(graph), rcond=1e-12)


def resistance_oracle(graph, u, v):
    Lp = pinv_oracle(graph)
    return Lp[u, u] + Lp[v, v] - 2 * Lp[u, v]


def kirchhoff_pair_sum(graph):
    """K as the brute-force sum of pairwise effective resistances."""
    Lp = pinv_oracle(graph)
    d = np.diag(Lp)
    r = d[:, None] + d[None, :] - 2 * Lp
    return 0.5 * float(r.sum())


def kirchhoff_eigen(graph):
    """K as n times the sum of reciprocal nonzero Laplacian eigenvalues."""
    vals = np.linalg.eigvalsh(dense_laplacian(graph))
    return graph.n * float((1.0 / vals[1:]).sum())


def marginal_oracle(graph, edge):
    """K(G) - K(G + e) from two independent pseudoinverses."""
    before = kirchhoff_pair_sum(graph)
    after = kirchhoff_pair_sum(graph.with_edges([edge]))
    return before - after


def bfs_distances(graph, source):
    """Plain python BFS, independent of scipy."""
    dist = [-1] * graph.n
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(int(v))
    return np.asarray(dist)


def eccentricity_oracle(graph):
    return np.asarray(
        [bfs_distances(graph, s).max() for s in range(graph.n)]
    )


def non_edges(graph):
    return [
        (u, v)
        for u in range(graph.n)
        for v in range(u + 1, graph.n)
        if not graph.has_edge(u, v)
    ]


def best_subset_oracle(graph, k):
    """Optimal k-subset by plain enumeration of fresh pseudoinverses."""
    cand = non_edges(graph)
    best_k, best_set = np.inf, None
    for combo in combinations(cand, k):
        val = kirchhoff_pair_sum(graph.with_edges(list(combo)))
        if val < best_k - 1e-9:
            best_k, best_set = val, combo
    return best_set, best_k


def greedy_from_scratch(graph, k, score):
    """Greedy selection recomputing a fresh pseudoinverse every round.

    ``score`` in {"decrease", "gradient"}.
    """
    g = graph
    chosen = []
    for _ in range(k):
        Lp = pinv_oracle(g)
        Lp2 = Lp @ Lp
        best, best_edge = -np.inf, None
        for (u, v) in non_edges(g):
            b2 = Lp2[u, u] + Lp2[v, v] - 2 * Lp2[u, v]
            if score == "gradient":
                val = b2
            else:
                r = Lp[u, u] + Lp[v, v] - 2 * Lp[u, v]
                val = g.n * b2 / (1 + r)
            if val > best * (1 + 1e-12) + 1e-15:
                best, best_edge = val, (u, v)
        chosen.append(best_edge)
        g = g.with_edges([best_edge])
    return chosen


def random_connected_graph(n, p, rng):
    """Connectivity-conditioned G(n, p) sample."""
    while True:
        iu = np.triu_indices(n, k=1)
        mask = rng.random(iu[0].size) < p
        edges = np.column_stack([iu[0][mask], iu[1][mask]])
        if edges.size == 0:
            continue
        g = Graph(n, edges)
        if g.is_connected():
            return g


def path_graph(n):
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n):
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(n):
    return Graph(n, [(0, i) for i in range(1, n)])
