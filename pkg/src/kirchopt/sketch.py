"""Randomized distance estimators: resistance sketches and node embeddings.

Both structures project the relevant pseudoinverse action into t ~ log(n)
dimensions with a random sign matrix and realize each row with one Laplacian
solve.  The embedding doubles as the biharmonic-distance estimator, since
the squared biharmonic distance is the squared Euclidean gap between
pseudoinverse columns.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .graph import Graph, GraphError
from .linalg import (
    SignProjection,
    jl_matrix,
    lap_solve,
    lap_solve_block,
    TOL_FLOOR,
)


class ToleranceSpec(NamedTuple):
    value: float
    floored: bool


def solver_tolerance(n, beta, delta):
    """Per-row solve tolerance making the embedding distortion at most
    ``delta`` on every pair: (delta/3n) * sqrt(6(1-beta) / (n(n^2-1)(1+beta))).

    Floored at 1e-10; the flag reports when the floor binds.
    """
    if not (0 < beta < 1 and 0 < delta < 1):
        raise ValueError("beta and delta must lie in (0,1)")
    if n < 2:
        raise ValueError("tolerance needs n >= 2")
    raw = (delta / (3.0 * n)) * math.sqrt(
        6.0 * (1.0 - beta) / (n * (n**2 - 1.0) * (1.0 + beta))
    )
    if raw < TOL_FLOOR:
        return ToleranceSpec(TOL_FLOOR, True)
    return ToleranceSpec(raw, False)


def _rows_for(n, level, c_jl):
    return max(1, math.ceil(c_jl * math.log(n) / level**2))


def _pair_sq_norm(rows, u, v):
    d = rows[:, u].astype(np.float64) - rows[:, v].astype(np.float64)
    return float(d @ d)


# ---------------------------------------------------------------------------
# effective-resistance sketch
# ---------------------------------------------------------------------------

@dataclass
class ResistanceSketch:
    """Rows approximate the signed-incidence image of L+, so squared column
    differences estimate effective resistances within (1 +- epsilon/2) w.h.p.
    """

    rows: np.ndarray          # t x n
    t: int
    seed: int
    epsilon: float
    solver_tol: float
    floored: bool

    def query(self, u, v):
        if u == v:
            raise GraphError("resistance query needs two distinct nodes")
        return _pair_sq_norm(self.rows, u, v)

    def gram(self):
        """n x n Gram matrix of the rows, for bulk pair queries."""
        return self.rows.T @ self.rows


def query_resistance(sk, u, v):
    return sk.query(u, v)


def build_resistance_sketch(graph, epsilon, seed, c_jl=1.0, solver_tol=None):
    """Sketch all effective resistances of a connected graph.

    Each of the t = ceil(c_jl * log n / (epsilon/2)^2) rows solves the
    Laplacian against a random +-1/sqrt(t) combination of edge vectors.
    """
    if not (0 < epsilon < 1):
        raise ValueError("epsilon must lie in (0,1)")
    n, m = graph.n, graph.m
    t = _rows_for(n, epsilon / 2.0, c_jl)
    if solver_tol is None:
        spec = solver_tolerance(n, epsilon / 2.0, epsilon / 2.0)
        solver_tol, floored = spec.value, spec.floored
    else:
        floored = solver_tol < TOL_FLOOR
    proj = jl_matrix(t, m, seed)
    # signed incidence, one row per edge; random orientation is absorbed by
    # the sign projection
    inc = sparse.csr_matrix(
        (
            np.concatenate([np.ones(m), -np.ones(m)]),
            (
                np.concatenate([np.arange(m), np.arange(m)]),
                np.concatenate([graph.edges_u, graph.edges_v]),
            ),
        ),
        shape=(m, n),
    )
    rows = np.empty((t, n), dtype=np.float64)
    chunk = max(1, min(t, int(2e7 // max(m, 1))))
    for lo in range(0, t, chunk):
        hi = min(t, lo + chunk)
        rhs = inc.T @ proj.row_block(lo, hi).T  # n x (hi-lo)
        sol, _ = lap_solve_block(graph, rhs, solver_tol)
        rows[lo:hi] = sol.T
    return ResistanceSketch(rows, t, seed, epsilon, solver_tol, floored)


# ---------------------------------------------------------------------------
# node embedding (biharmonic sketch)
# ---------------------------------------------------------------------------

@dataclass
class EmbeddingSketch:
    """Approximate projected pseudoinverse columns.

    Column i approximates Q L+ e_i; squared column differences estimate
    squared biharmonic distances within (1 +- (beta + delta)) w.h.p.
    ``projection`` keeps the sign matrix (bit-packed) so coordinate updates
    can form Q y without any dense reconstruction.
    """

    coords: np.ndarray        # t x n
    t: int
    seed: int
    beta: float
    delta: float
    solver_tol: float
    c_jl: float
    floored: bool
    projection: SignProjection
    updates: int = 0

    def query(self, u, v):
        if u == v:
            raise GraphError("biharmonic query needs two distinct nodes")
        return _pair_sq_norm(self.coords, u, v)

    def gram(self, ids=None):
        X = self.coords if ids is None else self.coords[:, ids]
        X = X.astype(np.float64, copy=False)
        return X.T @ X


def query_biharmonic(sk, u, v):
    return sk.query(u, v)


def embed_nodes(graph, beta, solver_tol, seed, c_jl=1.0, dtype=np.float64,
                delta=0.0):
    """Embed every node in t = ceil(c_jl * log n / beta^2) dimensions.

    Row j of the embedding is one Laplacian solve against row j of a fresh
    sign projection at the given tolerance.  ``delta`` is recorded for
    provenance only; callers fold it into ``solver_tol``.
    """
    if not (0 < beta < 1):
        raise ValueError("beta must lie in (0,1)")
    n = graph.n
    t = _rows_for(n, beta, c_jl)
    if isinstance(solver_tol, ToleranceSpec):
        solver_tol, floored = solver_tol.value, solver_tol.floored
    else:
        floored = solver_tol < TOL_FLOOR
    proj = jl_matrix(t, n, seed)
    coords = np.empty((t, n), dtype=dtype)
    chunk = max(1, min(t, int(4e7 // max(n, 1))))
    for lo in range(0, t, chunk):
        hi = min(t, lo + chunk)
        rhs = proj.row_block(lo, hi, dtype=dtype).T  # n x (hi-lo)
        sol, _ = lap_solve_block(graph, rhs, solver_tol, dtype=dtype)
        coords[lo:hi] = sol.T
    return EmbeddingSketch(
        coords, t, seed, beta, delta, solver_tol, c_jl, floored, proj
    )


def apply_embedding_update(sk, y, edge, columns=None):
    """Shift embedded coordinates for an edge insertion, given y ~= L+ b.

    Every column (or just ``columns``) moves by -(Q y) (y^T e_i) / (1 + y^T b).
    Returns the denominator so callers can reuse it.
    """
    u, v = edge
    denom = 1.0 + float(y[u] - y[v])
    if denom <= 0:
        raise GraphError("non-positive update denominator: corrupted sketch")
    qy = sk.projection.matvec(y).astype(sk.coords.dtype)
    if columns is None:
        sk.coords -= np.outer(qy, y.astype(sk.coords.dtype)) / denom
    else:
        cols = np.asarray(columns)
        sk.coords[:, cols] -= np.outer(qy, y[cols].astype(sk.coords.dtype)) / denom
    sk.updates += 1
    return denom


def update_embedding(sk, graph, edge, solver_tol0=None, columns=None):
    """Bring the sketch up to date with ``graph`` plus one new edge.

    ``graph`` is the pre-insertion graph and ``edge`` must be one of its
    non-edges.  One Laplacian solve realizes the shift direction; the sketch
    is modified in place and returned.
    """
    u, v = int(edge[0]), int(edge[1])
    if graph.has_edge(u, v):
        raise GraphError(f"({u},{v}) is already an edge")
    if solver_tol0 is None:
        solver_tol0 = min(sk.solver_tol, 1e-8)
    b = np.zeros(graph.n)
    b[u] = 1.0
    b[v] = -1.0
    y = lap_solve(graph, b, solver_tol0)
    apply_embedding_update(sk, y, (u, v), columns=columns)
    return sk


# ---------------------------------------------------------------------------
# cache serialization
# ---------------------------------------------------------------------------

def sketch_cache_key(graph, kind, seed, **params):
    """Content hash over the graph, sketch kind, seed, and parameters."""
    h = hashlib.sha256()
    h.update(f"{kind}|n={graph.n}|m={graph.m}|seed={seed}".encode())
    h.update(json.dumps(params, sort_keys=True).encode())
    h.update(graph.edges_u.tobytes())
    h.update(graph.edges_v.tobytes())
    return h.hexdigest()[:24]


def save_embedding(path, sk):
    meta = {
        "t": sk.t, "seed": sk.seed, "beta": sk.beta, "delta": sk.delta,
        "solver_tol": sk.solver_tol, "c_jl": sk.c_jl,
        "floored": sk.floored, "updates": sk.updates,
        "cols": sk.projection.cols,
    }
    np.savez_compressed(
        path, coords=sk.coords, bits=sk.projection._bits,
        meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
    )


def load_embedding(path):
    data = np.load(path)
    meta = json.loads(bytes(data["meta"]).decode())
    proj = SignProjection(meta["t"], meta["cols"], meta["seed"], data["bits"])
    return EmbeddingSketch(
        data["coords"], meta["t"], meta["seed"], meta["beta"], meta["delta"],
        meta["solver_tol"], meta["c_jl"], meta["floored"], proj,
        updates=meta["updates"],
    )
