"""Undirected simple graphs: ingestion, connectivity, eccentricities, pruning.

Nodes are contiguous integers 0..n-1.  A :class:`Graph` is immutable after
construction; edge additions return new instances.  External node labels
(from edge-list files) are carried in ``original_labels`` so results can be
reported in the caller's labeling.
"""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class GraphError(ValueError):
    """Structural errors: disconnected input, bad edges, parse failures."""


class Graph:
    """Immutable undirected simple graph with CSR adjacency.

    Parameters
    ----------
    n : int
        Node count (labels 0..n-1).
    edges : array-like of shape (m, 2)
        Unordered pairs; duplicates and self-loops are rejected here
        (use :func:`load_edge_list` for dirty input).
    original_labels : optional array of shape (n,)
        External label of each node; defaults to the identity.
    """

    __slots__ = (
        "n", "m", "edges_u", "edges_v", "original_labels",
        "_indptr", "_indices", "_edge_codes", "_lap", "_lambda2",
    )

    def __init__(self, n, edges, original_labels=None):
        n = int(n)
        if n <= 0:
            raise GraphError("graph needs at least one node")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        u = np.minimum(edges[:, 0], edges[:, 1])
        v = np.maximum(edges[:, 0], edges[:, 1])
        if edges.size and (u.min() < 0 or v.max() >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(u == v):
            raise GraphError("self-loops are not allowed")
        order = np.lexsort((v, u))
        u, v = u[order], v[order]
        codes = u * n + v
        if codes.size and np.any(np.diff(codes) == 0):
            raise GraphError("duplicate edges are not allowed")

        self.n = n
        self.m = int(u.size)
        self.edges_u = u
        self.edges_v = v
        self._edge_codes = codes
        if original_labels is None:
            original_labels = np.arange(n, dtype=np.int64)
        self.original_labels = np.asarray(original_labels, dtype=np.int64)
        if self.original_labels.shape != (n,):
            raise GraphError("original_labels must have one entry per node")

        heads = np.concatenate([u, v])
        tails = np.concatenate([v, u])
        order = np.lexsort((tails, heads))
        heads, tails = heads[order], tails[order]
        self._indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self._indptr, heads + 1, 1)
        np.cumsum(self._indptr, out=self._indptr)
        self._indices = tails
        self._lap = None
        self._lambda2 = None

    # -- basic queries ----------------------------------------------------

    def neighbors(self, i):
        """Sorted neighbor ids of node ``i`` (read-only view)."""
        return self._indices[self._indptr[i]:self._indptr[i + 1]]

    def degrees(self):
        return np.diff(self._indptr)

    def has_edge(self, u, v):
        if u == v:
            return False
        a, b = (u, v) if u < v else (v, u)
        code = a * self.n + b
        pos = np.searchsorted(self._edge_codes, code)
        return pos < self.m and self._edge_codes[pos] == code

    def contains_pairs(self, us, vs):
        """Vectorized edge-membership test for arrays of endpoints."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        a = np.minimum(us, vs)
        b = np.maximum(us, vs)
        codes = a * self.n + b
        pos = np.searchsorted(self._edge_codes, codes)
        pos = np.clip(pos, 0, max(self.m - 1, 0))
        if self.m == 0:
            return np.zeros(codes.shape, dtype=bool)
        return self._edge_codes[pos] == codes

    @property
    def candidate_count(self):
        """Number of addable node pairs (non-edges)."""
        return self.n * (self.n - 1) // 2 - self.m

    def edge_array(self):
        return np.column_stack([self.edges_u, self.edges_v])

    def laplacian(self):
        """CSR Laplacian, cached."""
        if self._lap is None:
            n = self.n
            rows = np.concatenate([self.edges_u, self.edges_v, np.arange(n)])
            cols = np.concatenate([self.edges_v, self.edges_u, np.arange(n)])
            data = np.concatenate([
                -np.ones(2 * self.m), self.degrees().astype(np.float64),
            ])
            self._lap = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
        return self._lap

    def adjacency(self):
        n = self.n
        rows = np.concatenate([self.edges_u, self.edges_v])
        cols = np.concatenate([self.edges_v, self.edges_u])
        return sparse.csr_matrix(
            (np.ones(2 * self.m), (rows, cols)), shape=(n, n)
        )

    def is_connected(self):
        if self.n == 1:
            return True
        ncomp, _ = csgraph.connected_components(self.adjacency(), directed=False)
        return ncomp == 1

    def with_edges(self, new_edges):
        """New graph with ``new_edges`` added (each must be a non-edge)."""
        new_edges = np.asarray(new_edges, dtype=np.int64).reshape(-1, 2)
        for a, b in new_edges:
            if a == b:
                raise GraphError("cannot add a self-loop")
            if self.has_edge(int(a), int(b)):
                raise GraphError(f"edge ({a},{b}) already present")
        combined = np.vstack([self.edge_array(), new_edges])
        return Graph(self.n, combined, original_labels=self.original_labels)

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


@dataclass
class LoadReport:
    """Cleaning diagnostics from :func:`load_edge_list`."""

    lines_read: int
    dropped_self_loops: int
    dropped_duplicates: int


def _open_text(source):
    if isinstance(source, (str, Path)):
        path = Path(source)
        if path.suffix == ".gz":
            return gzip.open(path, "rt"), True
        return open(path, "r"), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary streams and file-like objects
    return io.TextIOWrapper(source), False


def load_edge_list(source):
    """Parse an edge-list into a :class:`Graph` with contiguous ids.

    ``source`` may be a path (``.gz`` accepted) or a text stream.  Lines
    starting with ``#`` or ``%`` and blank lines are skipped.  Arbitrary
    integer labels are remapped to 0..n-1 in sorted label order; the graph's
    ``original_labels`` records the inverse mapping.  Self-loops and repeated
    edges are dropped silently and counted in the report.

    Returns ``(graph, report)``.

    Raises
    ------
    GraphError
        On a malformed line (message carries the line number) or empty input.
    """
    stream, owns = _open_text(source)
    us, vs = [], []
    lines_read = 0
    self_loops = 0
    try:
        for lineno, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line or line[0] in "#%":
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(
                    f"line {lineno}: expected two integer tokens, got {line!r}"
                )
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphError(
                    f"line {lineno}: non-integer token in {line!r}"
                ) from None
            lines_read += 1
            if a == b:
                self_loops += 1
                continue
            us.append(a)
            vs.append(b)
    finally:
        if owns:
            stream.close()

    if lines_read == 0:
        raise GraphError("empty edge list")

    us = np.asarray(us, dtype=np.int64)
    vs = np.asarray(vs, dtype=np.int64)
    labels = np.unique(np.concatenate([us, vs]))
    u = np.searchsorted(labels, np.minimum(us, vs))
    v = np.searchsorted(labels, np.maximum(us, vs))
    codes = np.unique(u.astype(np.int64) * labels.size + v)
    duplicates = int(us.size - codes.size)
    edges = np.column_stack([codes // labels.size, codes % labels.size])
    graph = Graph(labels.size, edges, original_labels=labels)
    return graph, LoadReport(lines_read, self_loops, duplicates)


def largest_connected_component(graph):
    """Induced subgraph on the largest component, ids re-contiguized.

    Size ties are broken toward the component containing the smallest
    original label.
    """
    ncomp, labels = csgraph.connected_components(
        graph.adjacency(), directed=False
    )
    if ncomp == 1:
        return graph
    sizes = np.bincount(labels, minlength=ncomp)
    best = np.flatnonzero(sizes == sizes.max())
    if best.size > 1:
        min_label = [
            graph.original_labels[labels == c].min() for c in best
        ]
        keep = best[int(np.argmin(min_label))]
    else:
        keep = best[0]
    nodes = np.flatnonzero(labels == keep)
    remap = -np.ones(graph.n, dtype=np.int64)
    remap[nodes] = np.arange(nodes.size)
    mask = remap[graph.edges_u] >= 0
    edges = np.column_stack([
        remap[graph.edges_u[mask]], remap[graph.edges_v[mask]],
    ])
    return Graph(nodes.size, edges, original_labels=graph.original_labels[nodes])


def _bfs_distances(adj, source):
    d = csgraph.dijkstra(adj, directed=False, unweighted=True, indices=source)
    return d


def _eccentricities_bitset(graph, sources, word_sources=4096):
    """Exact eccentricities of ``sources`` by bit-parallel multi-source BFS.

    Packs 64 sources per machine word; one level expands every source's
    frontier with one contiguous gather + segmented OR per word.
    """
    n = graph.n
    indptr, indices = graph._indptr, graph._indices
    seg = indptr[:-1]
    ecc = np.zeros(sources.size, dtype=np.int64)

    for lo in range(0, sources.size, word_sources):
        hi = min(sources.size, lo + word_sources)
        chunk = sources[lo:hi]
        W = (chunk.size + 63) // 64
        visited = np.zeros((W, n), dtype=np.uint64)
        bit = np.uint64(1) << np.uint64(np.arange(chunk.size) % 64)
        visited[np.arange(chunk.size) // 64, chunk] |= bit
        frontier = visited.copy()
        new = np.empty_like(visited)
        level = 0
        while True:
            level += 1
            any_active = False
            actives = np.zeros(W, dtype=np.uint64)
            for w in range(W):
                np.bitwise_or.reduceat(frontier[w][indices], seg, out=new[w])
                new[w] &= ~visited[w]
                visited[w] |= new[w]
                actives[w] = np.bitwise_or.reduce(new[w])
            if not actives.any():
                break
            alive = np.flatnonzero(
                (actives[np.arange(chunk.size) // 64]
                 >> np.uint64(np.arange(chunk.size) % 64)) & np.uint64(1)
            )
            ecc[lo + alive] = level
            frontier, new = new, frontier
    return ecc


def eccentricities(graph):
    """Exact hop eccentricity of every node of a connected graph.

    Small graphs run chunked all-sources BFS; large ones use the
    bit-parallel multi-source sweep (still exact, and immune to the
    bound-stalling plateaus of scale-free graphs).
    """
    n = graph.n
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    if not graph.is_connected():
        raise GraphError("eccentricities require a connected graph")

    if n <= 10_000:
        adj = graph.adjacency()
        ecc = np.zeros(n, dtype=np.int64)
        chunk = max(1, int(2e6 // n))
        for lo in range(0, n, chunk):
            hi = min(n, lo + chunk)
            d = _bfs_distances(adj, np.arange(lo, hi))
            ecc[lo:hi] = d.max(axis=-1).astype(np.int64)
        return ecc
    return _eccentricities_bitset(graph, np.arange(n))


def prune_central_nodes(graph, ecc):
    """Node ids whose eccentricity is >= that of every neighbor.

    A node is discarded exactly when some neighbor is strictly more
    eccentric; the survivors are the peripheral candidates kept for
    extreme-point search.
    """
    ecc = np.asarray(ecc)
    if ecc.shape != (graph.n,):
        raise GraphError("eccentricity table does not match the graph")
    keep = np.ones(graph.n, dtype=bool)
    larger_u = ecc[graph.edges_u] < ecc[graph.edges_v]
    larger_v = ecc[graph.edges_v] < ecc[graph.edges_u]
    keep[graph.edges_u[larger_u]] = False
    keep[graph.edges_v[larger_v]] = False
    return np.flatnonzero(keep)


def preferential_attachment_graph(n, m_attach, seed=0):
    """Synthetic scale-free graph: each new node links to ``m_attach``
    distinct earlier nodes chosen proportionally to degree.

    Seeded with a star on ``m_attach + 1`` nodes, so the result is connected.
    """
    if m_attach < 1 or n <= m_attach:
        raise GraphError("need n > m_attach >= 1")
    rng = np.random.default_rng(seed)
    us = [0] * m_attach
    vs = list(range(1, m_attach + 1))
    # stub list holds one entry per edge endpoint: sampling uniformly from it
    # is degree-proportional sampling
    stubs = us + vs
    for new in range(m_attach + 1, n):
        targets = set()
        while len(targets) < m_attach:
            pick = stubs[rng.integers(0, len(stubs))]
            targets.add(int(pick))
        for t in targets:
            us.append(t)
            vs.append(new)
            stubs.append(t)
            stubs.append(new)
    edges = np.column_stack([np.asarray(us), np.asarray(vs)])
    return Graph(n, edges)
