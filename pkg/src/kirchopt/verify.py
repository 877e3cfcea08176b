"""Self-contained oracle checks behind the ``verify`` command.

Each check recomputes its ground truth independently (closed forms, fresh
dense factorizations, exhaustive scans) and reports the measured error
against the pinned tolerance.  ``tiny`` runs in well under a minute; ``desk``
adds the n=200 sketch suites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .linalg import laplacian_pinv, lap_solve, pseudo_inverse
from .kirchhoff import kirchhoff_index, marginal_decrease, spectral_bounds
from .sketch import build_resistance_sketch, embed_nodes, solver_tolerance
from .hull import PointCloud, approx_convex_hull
from .optimize import brute_force, deter, fast_grad, fast_grad_plus


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


def random_connected_graph(n, p, rng):
    """Erdos-Renyi sample conditioned on connectivity (resampled)."""
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


def complete_graph(n):
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


# ---------------------------------------------------------------------------
# individual checks
# ---------------------------------------------------------------------------

def check_closed_forms(corrupt=None):
    """K of paths and complete graphs against their closed forms."""
    worst = 0.0
    for n in range(3, 13):
        st = pseudo_inverse(path_graph(n))
        if corrupt is not None:
            corrupt(st)
        worst = max(worst, abs(kirchhoff_index(st) - n * (n * n - 1) / 6.0))
    for n in range(3, 11):
        st = pseudo_inverse(complete_graph(n))
        if corrupt is not None:
            corrupt(st)
        worst = max(worst, abs(kirchhoff_index(st) - (n - 1.0)))
    return CheckResult("closed-form Kirchhoff values", worst <= 1e-9, worst, 1e-9)


def check_marginal_equivalence(graphs=10, seed=101):
    """Closed-form decrease vs from-scratch recomputation, all candidates."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(graphs):
        g = random_connected_graph(12, 0.3, rng)
        st = pseudo_inverse(g)
        k0 = kirchhoff_index(st)
        for u in range(g.n):
            for v in range(u + 1, g.n):
                if g.has_edge(u, v):
                    continue
                delta = marginal_decrease(st, (u, v))
                fresh = k0 - kirchhoff_index(pseudo_inverse(g.with_edges([(u, v)])))
                worst = max(worst, abs(delta - fresh) / max(abs(fresh), 1e-30))
    return CheckResult("marginal decrease equivalence", worst <= 1e-8, worst, 1e-8)


def check_rank1_drift(graphs=5, inserts=5, seed=202):
    """Maintained L+ and (L+)^2 vs fresh dense recomputation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(graphs):
        g = random_connected_graph(15, 0.3, rng)
        st = pseudo_inverse(g)
        for _ in range(inserts):
            nonedges = [
                (u, v)
                for u in range(g.n)
                for v in range(u + 1, g.n)
                if not g.has_edge(u, v)
            ]
            e = nonedges[rng.integers(len(nonedges))]
            st.add_edge(e)
            g = g.with_edges([e])
        fresh = pseudo_inverse(g)
        worst = max(worst, float(np.abs(st.Lp - fresh.Lp).max()))
        worst = max(worst, float(np.abs(st.Lp2 - fresh.Lp2).max()))
    return CheckResult("rank-1 maintenance drift", worst <= 1e-6, worst, 1e-6)


def check_solver_contract(seed=303, tol=1e-6, trials=6):
    """Energy-norm error of the iterative solver vs the dense oracle."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        g = random_connected_graph(100, 0.06, rng)
        Lp = laplacian_pinv(g)
        L = g.laplacian().toarray()
        b = rng.standard_normal(g.n)
        b -= b.mean()
        x = lap_solve(g, b, tol)
        ref = Lp @ b
        err = x - ref
        num = math.sqrt(max(err @ L @ err, 0.0))
        den = math.sqrt(max(ref @ L @ ref, 1e-300))
        worst = max(worst, num / den)
    return CheckResult("iterative solver energy-norm contract", worst <= tol, worst, tol)


def check_hull_certificate(clouds=3, points=200, dims=10, mu=0.01, seed=404):
    """Member-set diameter vs exact diameter on random clouds."""
    rng = np.random.default_rng(seed)
    worst = 1.0
    for _ in range(clouds):
        X = rng.standard_normal((dims, points))
        cloud = PointCloud(np.arange(points), X)
        subset = approx_convex_hull(cloud, mu)
        G = X.T @ X
        nm = np.diag(G)
        d2 = nm[:, None] + nm[None, :] - 2 * G
        exact = float(d2.max())
        pos = cloud.positions(subset.member_ids)
        Xm = X[:, pos]
        Gm = Xm.T @ Xm
        nmm = np.diag(Gm)
        got = float((nmm[:, None] + nmm[None, :] - 2 * Gm).max())
        worst = min(worst, got / exact)
    bound = 1.0 - 8.0 * mu
    return CheckResult("hull diameter guarantee", worst >= bound, worst, bound)


def check_greedy_bound(seed=505, samples=25):
    """Greedy decrease vs brute-force optimum scaled by the spectral bound."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    count = 0
    while count < samples:
        n = int(rng.integers(4, 7))
        g = random_connected_graph(n, 0.5, rng)
        k = int(rng.integers(1, 4))
        if g.candidate_count < k:
            continue
        count += 1
        bounds = spectral_bounds(g)
        st = pseudo_inverse(g)
        k0 = kirchhoff_index(st)
        greedy_drop = k0 - deter(g, k).final_kirchhoff
        best_drop = k0 - brute_force(g, k).final_kirchhoff
        if best_drop <= 1e-12:
            continue
        worst = min(worst, greedy_drop / (bounds.ratio_lb * best_drop))
    return CheckResult("greedy guarantee instantiation", worst >= 1.0, worst, 1.0)


def check_sketch_accuracy(seed=606, epsilon=0.2, n=200, graphs=2, seeds=3):
    """Share of candidate pairs whose sketched resistance and biharmonic
    values fall within the relative band."""
    rng = np.random.default_rng(seed)
    share = 1.0
    for _ in range(graphs):
        g = random_connected_graph(n, 0.05, rng)
        st = pseudo_inverse(g)
        iu = np.triu_indices(n, k=1)
        edge_mask = g.contains_pairs(iu[0], iu[1])
        us, vs = iu[0][~edge_mask], iu[1][~edge_mask]
        dL = np.diag(st.Lp)
        r_exact = dL[us] + dL[vs] - 2 * st.Lp[us, vs]
        dL2 = np.diag(st.Lp2)
        b_exact = dL2[us] + dL2[vs] - 2 * st.Lp2[us, vs]
        for s in range(seeds):
            sk = build_resistance_sketch(g, epsilon, seed=1000 + s)
            GR = sk.gram()
            d = np.diag(GR)
            r_est = d[us] + d[vs] - 2 * GR[us, vs]
            ok_r = np.abs(r_est / r_exact - 1.0) <= epsilon
            beta = epsilon / 2.0
            emb = embed_nodes(
                g, beta, solver_tolerance(n, beta, epsilon / 2.0),
                seed=2000 + s, delta=epsilon / 2.0,
            )
            GB = emb.gram()
            d = np.diag(GB)
            b_est = d[us] + d[vs] - 2 * GB[us, vs]
            ok_b = np.abs(b_est / b_exact - 1.0) <= epsilon
            share = min(share, float(ok_r.mean()), float(ok_b.mean()))
    return CheckResult("sketch accuracy band", share >= 0.95, share, 0.95)


def check_gradient_bound(seed=707, epsilon=0.25, n=200, seeds=3, k=3):
    """Per-round gradient of the hull-selected edge vs the true maximum."""
    rng = np.random.default_rng(seed)
    g = random_connected_graph(n, 0.05, rng)
    failures = 0
    total = 0
    worst = np.inf
    for s in range(seeds):
        for algo in (fast_grad, fast_grad_plus):
            res = algo(g, k, epsilon, seed=3000 + s)
            ratios = _gradient_ratios(g, res)
            worst = min(worst, min(ratios))
            total += 1
            if min(ratios) < 1.0 - epsilon:
                failures += 1
    passed = failures <= max(1, total // 10)
    return CheckResult(
        "per-round gradient approximation", passed, worst, 1.0 - epsilon,
        detail=f"{failures}/{total} runs broke the bound",
    )


def _gradient_ratios(graph, result):
    """True gradient of each selected edge over the true per-round maximum."""
    g = graph
    ratios = []
    for (u, v) in result.edges_internal:
        st = pseudo_inverse(g)
        dL2 = np.diag(st.Lp2)
        iu = np.triu_indices(g.n, k=1)
        edge_mask = g.contains_pairs(iu[0], iu[1])
        us, vs = iu[0][~edge_mask], iu[1][~edge_mask]
        grads = dL2[us] + dL2[vs] - 2 * st.Lp2[us, vs]
        top = float(grads.max())
        mine = float(dL2[u] + dL2[v] - 2 * st.Lp2[u, v])
        ratios.append(mine / top)
        g = g.with_edges([(u, v)])
    return ratios


TINY_CHECKS = (
    check_closed_forms,
    check_marginal_equivalence,
    check_rank1_drift,
    check_solver_contract,
    check_hull_certificate,
    check_greedy_bound,
)

DESK_CHECKS = TINY_CHECKS + (
    check_sketch_accuracy,
    check_gradient_bound,
)


def run_checks(scale="tiny", corrupt=None):
    """Run the suite for ``scale`` in {tiny, desk}; returns CheckResults.

    ``corrupt`` is a test hook applied to dense states inside the first
    check to confirm the suite actually fails on wrong numbers.
    """
    if scale not in ("tiny", "desk"):
        raise ValueError("scale must be 'tiny' or 'desk'")
    checks = TINY_CHECKS if scale == "tiny" else DESK_CHECKS
    results = []
    for fn in checks:
        if fn is check_closed_forms:
            results.append(fn(corrupt=corrupt))
        else:
            results.append(fn())
    return results
