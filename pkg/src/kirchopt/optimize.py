"""Edge-selection algorithms minimizing the Kirchhoff index.

Six selectors over the non-edge candidate set plus an exhaustive oracle:

* ``brute_force``  -- global optimum by enumeration (guarded)
* ``deter``        -- exact greedy on the marginal decrease, O(1) per edge
                      from the maintained (L+, (L+)^2) pair
* ``grad``         -- exact greedy on the gradient (squared biharmonic
                      distance)
* ``approx_greedy``-- sketched marginal decrease, fresh sketches per round
* ``fast_grad``    -- embed, approximate hull, farthest pair; per round
* ``fast_grad_plus`` -- eccentricity pre-pruning, one embedding, per-round
                      hull with rank-1 coordinate updates
* ``one_conv``     -- one embedding and one hull for all k rounds

Each returns a :class:`SelectionResult` with the Kirchhoff value after every
step (exact below a size threshold, probe-estimated above it), timings, and
diagnostics.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .graph import Graph, GraphError, eccentricities, prune_central_nodes
from .linalg import child_seed, lap_solve, lap_solve_block, laplacian_pinv
from .kirchhoff import kirchhoff_index
from .linalg import pseudo_inverse
from .sketch import (
    apply_embedding_update,
    build_resistance_sketch,
    embed_nodes,
    solver_tolerance,
)
from .hull import HullExhaustedError, PointCloud, approx_convex_hull, farthest_pair

TIE_RTOL = 1e-9
EXACT_TRACKER_LIMIT = 4096
SKETCH_F32_THRESHOLD = 20_000


@dataclass(frozen=True)
class AlgoParams:
    """Shared selector configuration.

    ``epsilon`` splits into (mu, beta, delta) = (eps/24, eps/3, eps/3)
    unless the fields are given explicitly.  ``solver_tol`` fixes the
    Laplacian-solve tolerance (benchmark mode); ``None`` derives it from the
    per-pair distortion formula.
    """

    k: int
    epsilon: float | None = None
    mu: float | None = None
    beta: float | None = None
    delta: float | None = None
    seed: int = 0
    c_jl: float = 1.0
    prune: bool = True
    solver_tol: float | None = None
    tracking: str = "auto"  # auto | exact | probe

    def resolve(self):
        mu, beta, delta = self.mu, self.beta, self.delta
        if self.epsilon is not None:
            if not (0 < self.epsilon < 1):
                raise ValueError("epsilon must lie in (0,1)")
            mu = self.epsilon / 24.0 if mu is None else mu
            beta = self.epsilon / 3.0 if beta is None else beta
            delta = self.epsilon / 3.0 if delta is None else delta
        if mu is None or beta is None or delta is None:
            raise ValueError("provide epsilon or all of (mu, beta, delta)")
        for name, val in (("mu", mu), ("beta", beta), ("delta", delta)):
            if not (0 < val < 1):
                raise ValueError(f"{name} must lie in (0,1)")
        return mu, beta, delta


@dataclass
class SelectionResult:
    """Ordered selection with per-step Kirchhoff values and timings."""

    algo: str
    n: int
    m: int
    edges: list
    edges_internal: list
    kirchhoff_initial: float
    kirchhoff: list
    step_seconds: list
    total_seconds: float
    params: dict
    diagnostics: dict = field(default_factory=dict)
    kirchhoff_estimated: bool = False

    @property
    def k(self):
        return len(self.edges)

    @property
    def final_kirchhoff(self):
        return self.kirchhoff[-1] if self.kirchhoff else self.kirchhoff_initial


def _check_k(graph, k):
    if k < 1:
        raise GraphError("k must be >= 1")
    if k > graph.candidate_count:
        raise GraphError(
            f"k={k} exceeds the {graph.candidate_count} candidate pairs"
        )
    if not graph.is_connected():
        raise GraphError("selection requires a connected graph")


# ---------------------------------------------------------------------------
# Kirchhoff-value trackers for the sketch-based selectors
# ---------------------------------------------------------------------------

class _ExactTracker:
    """Maintains K = n tr(L+) through rank-1 updates of a dense L+."""

    estimated = False

    def __init__(self, graph):
        self.n = graph.n
        self.Lp = laplacian_pinv(graph)
        self.value = graph.n * float(np.trace(self.Lp))

    def add_edge(self, graph_before, edge, y=None):
        u, v = edge
        w = self.Lp[:, u] - self.Lp[:, v]
        denom = 1.0 + float(w[u] - w[v])
        self.Lp -= np.outer(w, w) / denom
        self.value -= self.n * float(w @ w) / denom


class _ProbeTracker:
    """Hutchinson trace estimate over fixed sign probes, kept consistent
    through the same rank-1 updates as the embeddings, so the reported value
    strictly decreases.
    """

    estimated = True

    def __init__(self, graph, probes=8, tol=1e-7, seed=777):
        rng = np.random.default_rng(seed)
        self.n = graph.n
        self.sigma = rng.choice([-1.0, 1.0], size=(graph.n, probes))
        sols, _ = lap_solve_block(graph, self.sigma, tol)
        self.quads = np.einsum("ij,ij->j", self.sigma, sols)
        self.tol = tol

    @property
    def value(self):
        return self.n * float(self.quads.mean())

    def add_edge(self, graph_before, edge, y=None):
        u, v = edge
        if y is None:
            b = np.zeros(self.n)
            b[u] = 1.0
            b[v] = -1.0
            y = lap_solve(graph_before, b, self.tol)
        denom = 1.0 + float(y[u] - y[v])
        self.quads -= (self.sigma.T @ y) ** 2 / denom


def _make_tracker(graph, mode="auto"):
    if mode == "exact" or (mode == "auto" and graph.n <= EXACT_TRACKER_LIMIT):
        return _ExactTracker(graph)
    return _ProbeTracker(graph)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _result(algo, graph, chosen, kirchhoffs, secs, k0, params, diagnostics,
            total, estimated=False):
    labels = graph.original_labels
    edges = [(int(labels[u]), int(labels[v])) for u, v in chosen]
    return SelectionResult(
        algo=algo,
        n=graph.n,
        m=graph.m,
        edges=edges,
        edges_internal=[(int(u), int(v)) for u, v in chosen],
        kirchhoff_initial=k0,
        kirchhoff=list(kirchhoffs),
        step_seconds=list(secs),
        total_seconds=total,
        params=params,
        diagnostics=diagnostics,
        kirchhoff_estimated=estimated,
    )


def _best_scored_pair(state, blocked, kind):
    """Lexicographically tie-broken argmax of the exact per-pair score."""
    n = state.n
    dL = np.diag(state.Lp)
    dL2 = np.diag(state.Lp2)
    best_val, best_u, best_v = -np.inf, -1, -1
    chunk = max(1, int(4e6 // n))
    for lo in range(0, n - 1, chunk):
        hi = min(n - 1, lo + chunk)
        R2 = dL2[lo:hi, None] + dL2[None, :] - 2.0 * state.Lp2[lo:hi]
        if kind == "gradient":
            S = R2
        else:
            R1 = dL[lo:hi, None] + dL[None, :] - 2.0 * state.Lp[lo:hi]
            S = n * R2 / (1.0 + R1)
        S[blocked[lo:hi]] = -np.inf
        cols = np.arange(n)[None, :]
        rows = np.arange(lo, hi)[:, None]
        S[cols <= rows] = -np.inf
        top = float(S.max())
        if not np.isfinite(top):
            continue
        prev = abs(best_val) if np.isfinite(best_val) else 0.0
        band = TIE_RTOL * max(abs(top), prev, 1e-30)
        if top > best_val + band:
            flat = np.flatnonzero(S.ravel() >= top - band)[0]
            best_val = top
            best_u, best_v = lo + flat // n, int(flat % n)
    if best_u < 0:
        raise GraphError("no candidate pair available")
    return int(best_u), int(best_v), best_val


def _blocked_matrix(graph):
    blocked = graph.adjacency().toarray().astype(bool)
    np.fill_diagonal(blocked, True)
    return blocked


# ---------------------------------------------------------------------------
# exact selectors
# ---------------------------------------------------------------------------

def brute_force(graph, k, guard=1_000_000):
    """Globally optimal k-subset by exhaustive enumeration.

    Ties resolve to the lexicographically smallest edge sequence.  The last
    enumeration level is scored through the closed-form decrease, so only
    interior levels pay for state copies.
    """
    _check_k(graph, k)
    cand = [
        (u, v)
        for u in range(graph.n)
        for v in range(u + 1, graph.n)
        if not graph.has_edge(u, v)
    ]
    total = math.comb(len(cand), k)
    if total > guard:
        raise GraphError(
            f"{total} subsets exceed the enumeration guard ({guard})"
        )
    t0 = time.perf_counter()
    base = pseudo_inverse(graph)
    k0 = kirchhoff_index(base)

    best = [np.inf, None]

    def consider(K, combo):
        band = 1e-9 * max(abs(K), 1.0)
        if K < best[0] - band:
            best[0], best[1] = K, tuple(combo)

    def recurse(state, K, start, depth, prefix):
        if depth == k:
            consider(K, prefix)
            return
        remaining = k - depth
        for idx in range(start, len(cand) - remaining + 1):
            u, v = cand[idx]
            w, z = state.pair_diffs(u, v)
            denom = 1.0 + (w[u] - w[v])
            drop = state.n * (z[u] - z[v]) / denom
            if depth + 1 == k:
                consider(K - drop, prefix + [idx])
            else:
                nxt = state.copy()
                nxt.add_edge((u, v))
                recurse(nxt, K - drop, idx + 1, depth + 1, prefix + [idx])

    recurse(base, k0, 0, 0, [])

    chosen = [cand[i] for i in best[1]]
    ks = []
    replay = base.copy()
    for e in chosen:
        replay.add_edge(e)
        ks.append(kirchhoff_index(replay))
    total_s = time.perf_counter() - t0
    return _result(
        "brute", graph, chosen, ks, [total_s / k] * k, k0,
        {"k": k}, {"subsets": total}, total_s,
    )


def _dense_greedy(graph, k, kind, algo_name):
    _check_k(graph, k)
    t_start = time.perf_counter()
    state = pseudo_inverse(graph)
    blocked = _blocked_matrix(graph)
    k0 = kirchhoff_index(state)
    chosen, ks, secs = [], [], []
    for _ in range(k):
        t0 = time.perf_counter()
        u, v, _ = _best_scored_pair(state, blocked, kind)
        state.add_edge((u, v))
        blocked[u, v] = blocked[v, u] = True
        chosen.append((u, v))
        ks.append(kirchhoff_index(state))
        secs.append(time.perf_counter() - t0)
    return _result(
        algo_name, graph, chosen, ks, secs, k0, {"k": k}, {},
        time.perf_counter() - t_start,
    )


def deter(graph, k):
    """Exact greedy on the marginal Kirchhoff decrease."""
    return _dense_greedy(graph, k, "decrease", "deter")


def grad(graph, k):
    """Exact greedy on the gradient (squared biharmonic distance)."""
    return _dense_greedy(graph, k, "gradient", "grad")


# ---------------------------------------------------------------------------
# sketched marginal-decrease greedy
# ---------------------------------------------------------------------------

def approx_greedy(graph, k, epsilon, seed=0, c_jl=1.0, tracking="auto"):
    """Greedy on sketched scores n b~ / (1 + r~), rebuilt every round at
    accuracy epsilon/2 per factor.
    """
    _check_k(graph, k)
    if epsilon is None or not (0 < epsilon < 1):
        raise ValueError("epsilon must lie in (0,1)")
    t_start = time.perf_counter()
    g = graph
    n = graph.n
    tracker = _make_tracker(graph, tracking)
    k0 = tracker.value
    blocked = _blocked_matrix(graph)
    chosen, ks, secs = [], [], []
    floored = False
    for r in range(k):
        t0 = time.perf_counter()
        res = build_resistance_sketch(
            g, epsilon, child_seed(seed, r, 1), c_jl=c_jl
        )
        beta = 0.4 * epsilon
        tol = solver_tolerance(n, beta, 0.1 * epsilon)
        emb = embed_nodes(
            g, beta, tol, child_seed(seed, r, 2), c_jl=c_jl,
            delta=0.1 * epsilon,
        )
        floored |= res.floored or emb.floored
        GR = res.gram()
        GB = emb.gram()
        dR = np.diag(GR)
        dB = np.diag(GB)
        r_tilde = dR[:, None] + dR[None, :] - 2.0 * GR
        b_tilde = dB[:, None] + dB[None, :] - 2.0 * GB
        S = n * b_tilde / (1.0 + r_tilde)
        S[blocked] = -np.inf
        iu = np.triu_indices(n, k=1)
        flat = S[iu]
        top = float(flat.max())
        band = TIE_RTOL * max(abs(top), 1e-30)
        pick = np.flatnonzero(flat >= top - band)[0]
        u, v = int(iu[0][pick]), int(iu[1][pick])
        tracker.add_edge(g, (u, v))
        blocked[u, v] = blocked[v, u] = True
        chosen.append((u, v))
        ks.append(tracker.value)
        g = g.with_edges([(u, v)])
        secs.append(time.perf_counter() - t0)
    return _result(
        "approx", graph, chosen, ks, secs, k0,
        {"k": k, "epsilon": epsilon, "seed": seed, "c_jl": c_jl},
        {"solver_floored": floored},
        time.perf_counter() - t_start,
        estimated=tracker.estimated,
    )


# ---------------------------------------------------------------------------
# hull-based gradient selectors
# ---------------------------------------------------------------------------

def _embedding_dtype(n):
    return np.float32 if n > SKETCH_F32_THRESHOLD else np.float64


def _solve_tol_for(params, n, beta, delta):
    if params.solver_tol is not None:
        return params.solver_tol
    return solver_tolerance(n, beta, delta)


def _pick_from_hull(cloud, mu, g, max_retries=3):
    """Hull + farthest non-edge pair, halving mu when every pair is taken."""
    mu_r = mu
    retries = 0
    for _ in range(max_retries + 1):
        subset = approx_convex_hull(cloud, mu_r)
        try:
            u, v, d2 = farthest_pair(cloud, subset, g.contains_pairs)
            return u, v, d2, subset, retries
        except HullExhaustedError:
            mu_r /= 2.0
            retries += 1
    raise HullExhaustedError(
        f"hull pairs exhausted after {max_retries} retries"
    )


def fast_grad(graph, k=None, epsilon=None, seed=0, params=None):
    """Gradient greedy with a fresh embedding and hull every round."""
    if params is None:
        params = AlgoParams(k=k, epsilon=epsilon, seed=seed)
    mu, beta, delta = params.resolve()
    _check_k(graph, params.k)
    t_start = time.perf_counter()
    n = graph.n
    dtype = _embedding_dtype(n)
    tracker = _make_tracker(graph, params.tracking)
    k0 = tracker.value
    g = graph
    chosen, ks, secs, hull_sizes = [], [], [], []
    retries = 0
    floored = False
    for r in range(params.k):
        t0 = time.perf_counter()
        tol = _solve_tol_for(params, n, beta, delta)
        emb = embed_nodes(
            g, beta, tol, child_seed(params.seed, r), c_jl=params.c_jl,
            dtype=dtype, delta=delta,
        )
        floored |= emb.floored
        cloud = PointCloud.from_embedding(emb)
        u, v, _, subset, tries = _pick_from_hull(cloud, mu, g)
        retries += tries
        hull_sizes.append(int(subset.member_ids.size))
        tracker.add_edge(g, (u, v))
        chosen.append((u, v))
        ks.append(tracker.value)
        g = g.with_edges([(u, v)])
        secs.append(time.perf_counter() - t0)
    return _result(
        "fastgrad", graph, chosen, ks, secs, k0,
        {"k": params.k, "epsilon": params.epsilon, "mu": mu, "beta": beta,
         "delta": delta, "seed": params.seed, "c_jl": params.c_jl},
        {"hull_sizes": hull_sizes, "retries": retries,
         "solver_floored": floored},
        time.perf_counter() - t_start,
        estimated=tracker.estimated,
    )


def fast_grad_plus(graph, k=None, epsilon=None, seed=0, params=None):
    """Gradient greedy with eccentricity pre-pruning, one embedding, and
    rank-1 coordinate updates between rounds.
    """
    if params is None:
        params = AlgoParams(k=k, epsilon=epsilon, seed=seed)
    mu, beta, delta = params.resolve()
    _check_k(graph, params.k)
    t_start = time.perf_counter()
    n = graph.n
    dtype = _embedding_dtype(n)
    tracker = _make_tracker(graph, params.tracking)
    k0 = tracker.value

    if params.prune:
        ecc = eccentricities(graph)
        keep = prune_central_nodes(graph, ecc)
    else:
        keep = np.arange(n)
    tol = _solve_tol_for(params, n, beta, delta)
    emb = embed_nodes(
        graph, beta, tol, child_seed(params.seed, 0), c_jl=params.c_jl,
        dtype=dtype, delta=delta,
    )
    tol0 = min(emb.solver_tol, 1e-8)
    preprocess = time.perf_counter() - t_start

    g = graph
    chosen, ks, secs, hull_sizes = [], [], [], []
    retries = 0
    for r in range(params.k):
        t0 = time.perf_counter()
        cloud = PointCloud(keep, emb.coords[:, keep])
        u, v, _, subset, tries = _pick_from_hull(cloud, mu, g)
        retries += tries
        hull_sizes.append(int(subset.member_ids.size))
        b = np.zeros(n)
        b[u] = 1.0
        b[v] = -1.0
        y = lap_solve(g, b, tol0)
        apply_embedding_update(emb, y, (u, v))
        tracker.add_edge(g, (u, v), y=y)
        chosen.append((u, v))
        ks.append(tracker.value)
        g = g.with_edges([(u, v)])
        secs.append(time.perf_counter() - t0)
    return _result(
        "fastgrad+", graph, chosen, ks, secs, k0,
        {"k": params.k, "epsilon": params.epsilon, "mu": mu, "beta": beta,
         "delta": delta, "seed": params.seed, "c_jl": params.c_jl,
         "prune": params.prune},
        {"hull_sizes": hull_sizes, "retries": retries,
         "prune_size": int(keep.size), "preprocess_seconds": preprocess,
         "solver_floored": emb.floored},
        time.perf_counter() - t_start,
        estimated=tracker.estimated,
    )


def one_conv(graph, k=None, epsilon=None, seed=0, params=None):
    """Gradient greedy with a single embedding and a single hull; only the
    member coordinates are updated between rounds.
    """
    if params is None:
        params = AlgoParams(k=k, epsilon=epsilon, seed=seed)
    mu, beta, delta = params.resolve()
    _check_k(graph, params.k)
    t_start = time.perf_counter()
    n = graph.n
    dtype = _embedding_dtype(n)
    tracker = _make_tracker(graph, params.tracking)
    k0 = tracker.value

    tol = _solve_tol_for(params, n, beta, delta)
    emb = embed_nodes(
        graph, beta, tol, child_seed(params.seed, 0), c_jl=params.c_jl,
        dtype=dtype, delta=delta,
    )
    tol0 = min(emb.solver_tol, 1e-8)
    cloud = PointCloud.from_embedding(emb)
    subset = approx_convex_hull(cloud, mu)
    members = np.sort(np.asarray(subset.member_ids))
    preprocess = time.perf_counter() - t_start

    g = graph
    chosen, ks, secs = [], [], []
    rebuilds = 0
    early_stop = False
    mu_r = mu
    for r in range(params.k):
        t0 = time.perf_counter()
        while True:
            try:
                u, v, _ = farthest_pair(cloud, subset, g.contains_pairs)
                break
            except HullExhaustedError:
                if rebuilds >= 3:
                    early_stop = True
                    break
                # escape hatch: rebuild over the current (partially updated)
                # coordinates with a tighter tolerance
                mu_r /= 2.0
                rebuilds += 1
                subset = approx_convex_hull(cloud, mu_r)
                members = np.sort(np.asarray(subset.member_ids))
        if early_stop:
            break
        b = np.zeros(n)
        b[u] = 1.0
        b[v] = -1.0
        y = lap_solve(g, b, tol0)
        apply_embedding_update(emb, y, (u, v), columns=members)
        tracker.add_edge(g, (u, v), y=y)
        chosen.append((u, v))
        ks.append(tracker.value)
        g = g.with_edges([(u, v)])
        secs.append(time.perf_counter() - t0)
    diagnostics = {
        "hull_size": int(subset.member_ids.size),
        "hull_rebuilds": rebuilds,
        "preprocess_seconds": preprocess,
        "solver_floored": emb.floored,
    }
    if early_stop:
        diagnostics["early_stop"] = True
    return _result(
        "oneconv", graph, chosen, ks, secs, k0,
        {"k": params.k, "epsilon": params.epsilon, "mu": mu, "beta": beta,
         "delta": delta, "seed": params.seed, "c_jl": params.c_jl},
        diagnostics,
        time.perf_counter() - t_start,
        estimated=tracker.estimated,
    )


ALGORITHMS = {
    "brute": lambda graph, params: brute_force(graph, params.k),
    "deter": lambda graph, params: deter(graph, params.k),
    "grad": lambda graph, params: grad(graph, params.k),
    "approx": lambda graph, params: approx_greedy(
        graph, params.k, params.epsilon, seed=params.seed, c_jl=params.c_jl,
        tracking=params.tracking,
    ),
    "fastgrad": lambda graph, params: fast_grad(graph, params=params),
    "fastgrad+": lambda graph, params: fast_grad_plus(graph, params=params),
    "oneconv": lambda graph, params: one_conv(graph, params=params),
}
