"""Approximate extreme points of an embedded point cloud.

The construction greedily adds the point farthest from the convex hull of
the current members until every remaining point is certifiably within
``mu * d_est`` of that hull, where ``d_est`` is a realized pairwise distance
(double-sweep diameter estimate), hence a lower bound on the true diameter.
Distances to the member hull are driven by a batched pairwise Frank-Wolfe
projection; certification uses only upper bounds, which stay valid as the
hull grows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .graph import GraphError


class HullExhaustedError(GraphError):
    """Every member pair is excluded; rebuild the hull with a smaller mu."""


@dataclass
class PointCloud:
    """Node ids plus their embedded coordinates (one column per id)."""

    ids: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.ids.size != self.coords.shape[1]:
            raise GraphError("ids and coordinate columns disagree")
        if np.unique(self.ids).size != self.ids.size:
            raise GraphError("cloud ids must be distinct")
        self._pos = None

    @classmethod
    def from_embedding(cls, sketch, ids=None):
        if ids is None:
            ids = np.arange(sketch.coords.shape[1])
            return cls(ids, sketch.coords)
        ids = np.asarray(ids, dtype=np.int64)
        return cls(ids, sketch.coords[:, ids])

    def positions(self, node_ids):
        if self._pos is None:
            self._pos = {int(i): p for p, i in enumerate(self.ids)}
        return np.asarray([self._pos[int(i)] for i in np.atleast_1d(node_ids)])


@dataclass
class ExtremeSubset:
    """Approximate extreme points: every cloud point lies within
    ``hull_tol`` of the members' convex hull (certified by construction).
    """

    member_ids: np.ndarray
    hull_tol: float
    certified: bool
    rounds: int
    fw_iterations: int


class HullDistance(NamedTuple):
    value: float
    capped: bool


def _col_sq(X):
    return np.einsum("ij,ij->j", X, X, dtype=np.float64)


def _sq_dist_to(X, col):
    d = X - col[:, None]
    return _col_sq(d)


class _BatchProjector:
    """Pairwise Frank-Wolfe projection of many points onto conv(members).

    Tracks, per point, a convex combination over members whose residual norm
    upper-bounds the hull distance, and the matching duality-gap lower bound.
    """

    def __init__(self, points, members):
        self.X = points                      # t x A
        self.M = members                     # t x l
        A = points.shape[1]
        l = members.shape[1]
        self.W = np.zeros((l, A), dtype=members.dtype)
        if A:
            start = np.argmin(
                _col_sq(points)[None, :] - 2.0 * (members.T @ points)
                + _col_sq(members)[:, None],
                axis=0,
            )
            self.W[start, np.arange(A)] = 1.0
            self.H = members[:, start]
        else:
            self.H = np.zeros((members.shape[0], 0), dtype=members.dtype)
        self.iterations = 0

    def add_member(self, col):
        self.M = np.column_stack([self.M, col])
        self.W = np.vstack([self.W, np.zeros((1, self.W.shape[1]), dtype=self.W.dtype)])

    def add_points(self, points):
        if points.shape[1] == 0:
            return
        start = np.argmin(
            _col_sq(points)[None, :] - 2.0 * (self.M.T @ points)
            + _col_sq(self.M)[:, None],
            axis=0,
        )
        W_new = np.zeros((self.M.shape[1], points.shape[1]), dtype=self.W.dtype)
        W_new[start, np.arange(points.shape[1])] = 1.0
        self.X = np.column_stack([self.X, points])
        self.W = np.column_stack([self.W, W_new])
        self.H = np.column_stack([self.H, self.M[:, start]])

    def drop_points(self, keep, sample=64):
        """Compact to ``keep``; returns up to ``sample`` hull points that were
        projections of the dropped columns (cheap certificates for neighbors).
        """
        dropped = np.flatnonzero(~keep)
        if dropped.size > sample:
            dropped = dropped[:: max(1, dropped.size // sample)][:sample]
        anchors = self.H[:, dropped].copy() if dropped.size else None
        self.X = np.ascontiguousarray(self.X[:, keep])
        self.W = np.ascontiguousarray(self.W[:, keep])
        self.H = np.ascontiguousarray(self.H[:, keep])
        return anchors

    def bounds(self):
        R = self.X - self.H
        ub2 = _col_sq(R)
        S = self.M.T @ R
        gap = S.max(axis=0) - np.einsum("ij,ij->j", self.H, R, dtype=np.float64)
        lb2 = np.maximum(ub2 - 2.0 * np.maximum(gap, 0.0), 0.0)
        return np.sqrt(ub2), np.sqrt(lb2)

    def sweep(self, iters):
        """Run FW iterations; returns (ub, lb) per tracked point."""
        X, M = self.X, self.M
        A = X.shape[1]
        cols = np.arange(A)
        ub2 = None
        gap = None
        for _ in range(iters):
            self.iterations += 1
            R = X - self.H
            ub2 = _col_sq(R)
            S = M.T @ R                      # l x A
            s_idx = np.argmax(S, axis=0)
            s_val = S[s_idx, cols]
            gap = s_val - np.einsum("ij,ij->j", self.H, R, dtype=np.float64)
            if gap.max(initial=0.0) <= 0.0:
                break
            support = self.W > 1e-12
            S_masked = np.where(support, S, np.inf)
            a_idx = np.argmin(S_masked, axis=0)

            d = M[:, s_idx] - M[:, a_idx]
            den = _col_sq(d)
            num = np.einsum("ij,ij->j", R, d, dtype=np.float64)
            w_away = self.W[a_idx, cols].astype(np.float64)
            pair_ok = (den > 1e-30) & (s_idx != a_idx)

            p = np.flatnonzero(pair_ok)
            if p.size:
                step = np.clip(num[p] / den[p], 0.0, w_away[p]).astype(self.W.dtype)
                self.W[a_idx[p], p] -= step
                self.W[s_idx[p], p] += step
                self.H[:, p] += d[:, p] * step

            v = np.flatnonzero(~pair_ok)
            if v.size:
                dv = M[:, s_idx[v]] - self.H[:, v]
                denv = _col_sq(dv)
                numv = np.einsum("ij,ij->j", X[:, v] - self.H[:, v], dv, dtype=np.float64)
                lam = np.zeros(v.size)
                ok = denv > 1e-30
                lam[ok] = np.clip(numv[ok] / denv[ok], 0.0, 1.0)
                lam = lam.astype(self.W.dtype)
                self.W[:, v] *= 1.0 - lam
                self.W[s_idx[v], v] += lam
                self.H[:, v] += dv * lam

            if self.iterations % 25 == 0:
                np.clip(self.W, 0.0, None, out=self.W)
                self.W /= np.maximum(self.W.sum(axis=0, keepdims=True), 1e-30)
                self.H = M @ self.W
        if ub2 is None:
            return self.bounds()
        lb2 = np.maximum(ub2 - 2.0 * np.maximum(gap, 0.0), 0.0)
        return np.sqrt(ub2), np.sqrt(lb2)


def approx_convex_hull(cloud, mu, round_iters=8, certify_iters=24,
                       iter_cap=200_000, max_members=None, frontier_size=1024):
    """Greedy farthest-from-hull member selection down to ``mu * d_est``.

    Projection work is spent on a *frontier*: the top membership candidates
    plus everything close to the threshold.  Certified points (and their
    projections, which are hull points) prune their neighbors; whatever
    cannot be certified within budget simply joins the members, which never
    weakens the certificate.  ``max_members`` bounds the subset size for
    hostile geometries (certified=False when it binds); the first two
    members always realize the double-sweep diameter estimate, so the member
    diameter stays within a factor two of the cloud diameter even then.
    """
    if not (0 < mu < 1):
        raise ValueError("mu must lie in (0,1)")
    X = cloud.coords
    t, N = X.shape
    if N == 0:
        raise GraphError("empty cloud")
    if N == 1:
        return ExtremeSubset(cloud.ids.copy(), 0.0, True, 0, 0)

    # double-sweep diameter estimate: a realized distance, so <= the true one
    d0 = _sq_dist_to(X, X[:, 0])
    a = int(np.argmax(d0))
    da = _sq_dist_to(X, X[:, a])
    b = int(np.argmax(da))
    d_est = float(np.sqrt(da[b]))
    if d_est == 0.0:
        return ExtremeSubset(cloud.ids[:1].copy(), 0.0, True, 0, 0)
    thresh = mu * d_est

    members = [a, b]
    ub = np.sqrt(np.minimum(da, _sq_dist_to(X, X[:, b])))
    ub[a] = ub[b] = 0.0
    active = ub > thresh
    proj = _BatchProjector(X[:, :0].copy(), np.column_stack([X[:, a], X[:, b]]))
    frontier = np.empty(0, dtype=np.int64)  # cloud positions of proj columns
    in_frontier = np.zeros(N, dtype=bool)
    rounds = 0
    certified = True
    since_certify = 0

    def sync_frontier():
        nonlocal frontier
        act = np.flatnonzero(active & ~in_frontier)
        if not act.size:
            return
        want = act[ub[act] <= 3.0 * thresh]
        k = min(frontier_size, act.size)
        top = act[np.argpartition(ub[act], act.size - k)[act.size - k:]]
        cand = np.union1d(want, top)
        proj.add_points(np.ascontiguousarray(X[:, cand]))
        frontier = np.concatenate([frontier, cand])
        in_frontier[cand] = True

    def drop_from_frontier(keep):
        nonlocal frontier
        anchors = proj.drop_points(keep)
        in_frontier[frontier[~keep]] = False
        frontier = frontier[keep]
        if anchors is not None and frontier.size:
            d2 = (
                _col_sq(proj.X)[None, :]
                - 2.0 * (anchors.T @ proj.X)
                + _col_sq(anchors)[:, None]
            )
            ub[frontier] = np.minimum(
                ub[frontier], np.sqrt(np.maximum(d2.min(axis=0), 0.0))
            )

    while active.any():
        if max_members is not None and len(members) >= max_members:
            certified = False
            break
        sync_frontier()
        n_active = int(active.sum())
        sweeping = (
            proj.iterations < iter_cap
            and (since_certify < 16 or n_active <= frontier_size // 4
                 or rounds % 8 == 0)
        )
        if sweeping and frontier.size:
            near_done = float(ub[frontier].max()) <= 1.5 * thresh
            ub_f, _ = proj.sweep(certify_iters if near_done else round_iters)
            ub[frontier] = np.minimum(ub[frontier], ub_f)
            keep = ub[frontier] > thresh
            if not keep.all():
                active[frontier[~keep]] = False
                drop_from_frontier(keep)
                since_certify = 0
            else:
                since_certify += 1
        else:
            since_certify += 1
        act_idx = np.flatnonzero(active)
        if not act_idx.size:
            break
        rounds += 1
        new = int(act_idx[np.argmax(ub[act_idx])])
        members.append(new)
        active[new] = False
        if in_frontier[new]:
            drop_from_frontier(frontier != new)
        col = X[:, new]
        proj.add_member(col)
        # one cheap pass: the new member itself is in the hull
        act_idx = np.flatnonzero(active)
        if act_idx.size:
            dist_new = np.sqrt(_sq_dist_to(X[:, act_idx], col))
            ub[act_idx] = np.minimum(ub[act_idx], dist_new)
            newly_done = act_idx[ub[act_idx] <= thresh]
            if newly_done.size:
                active[newly_done] = False
                gone = in_frontier[frontier] & ~active[frontier]
                if gone.any():
                    drop_from_frontier(~gone)

    return ExtremeSubset(
        cloud.ids[np.asarray(members)], thresh, certified, rounds,
        proj.iterations,
    )


def distance_to_hull(point, subset, cloud, additive_tol=None, cap=20_000):
    """Euclidean distance from ``point`` to the members' convex hull.

    Iterative projection (toward the member best aligned with the residual,
    with paired away-steps) until the upper and lower bounds agree to the
    additive tolerance; hitting the cap returns the current upper bound with
    a flag.
    """
    pos = cloud.positions(subset.member_ids)
    M = cloud.coords[:, pos].astype(np.float64)
    point = np.asarray(point, dtype=np.float64)
    if additive_tol is None:
        d0 = _sq_dist_to(M, M[:, 0])
        a = int(np.argmax(d0))
        d_est = float(np.sqrt(_sq_dist_to(M, M[:, a]).max()))
        additive_tol = 1e-6 * max(d_est, 1e-30)
    proj = _BatchProjector(point[:, None].copy(), M)
    capped = False
    ub = lb = None
    while True:
        ub, lb = proj.sweep(32)
        if ub[0] - lb[0] <= additive_tol:
            break
        if proj.iterations >= cap:
            capped = True
            break
    return HullDistance(float(ub[0]), capped)


def _encode_pairs(us, vs):
    a = np.minimum(us, vs).astype(np.int64)
    b = np.maximum(us, vs).astype(np.int64)
    return (a << 32) | b


def farthest_pair(cloud, subset, excluded_pairs):
    """Most distant member pair whose node-id pair is not excluded.

    ``excluded_pairs`` is either a set of (u, v) tuples or a vectorized
    predicate ``f(us, vs) -> bool array``.  Near-ties resolve to the
    lexicographically smallest (min id, max id) pair.
    """
    pos = cloud.positions(subset.member_ids)
    ids = cloud.ids[pos]
    order = np.argsort(ids)
    ids = ids[order]
    Xm = cloud.coords[:, pos[order]].astype(np.float64)
    l = ids.size
    if l < 2:
        raise HullExhaustedError("need at least two members")

    if callable(excluded_pairs):
        predicate = excluded_pairs
    else:
        codes = (
            _encode_pairs(
                np.asarray([p[0] for p in excluded_pairs], dtype=np.int64),
                np.asarray([p[1] for p in excluded_pairs], dtype=np.int64),
            )
            if excluded_pairs
            else np.empty(0, dtype=np.int64)
        )

        def predicate(us, vs):
            return np.isin(_encode_pairs(us, vs), codes)

    nm2 = _col_sq(Xm)
    rtol = 64.0 * float(np.finfo(cloud.coords.dtype).eps)
    best_d2, best_u, best_v = -1.0, -1, -1
    chunk = max(1, int(4e6 // max(l, 1)))
    for lo in range(0, l - 1, chunk):
        hi = min(l - 1, lo + chunk)
        block = nm2[lo:hi, None] + nm2[None, :] - 2.0 * (Xm[:, lo:hi].T @ Xm)
        rows, cols = np.meshgrid(np.arange(lo, hi), np.arange(l), indexing="ij")
        valid = cols > rows
        u_ids = ids[rows[valid]]
        v_ids = ids[cols[valid]]
        d2 = block[valid]
        ok = ~predicate(u_ids, v_ids)
        if not ok.any():
            continue
        d2, u_ids, v_ids = d2[ok], u_ids[ok], v_ids[ok]
        top = float(d2.max())
        tie_band = rtol * max(top, abs(best_d2), 1e-30)
        tied = d2 >= top - tie_band
        pick = np.lexsort((v_ids[tied], u_ids[tied]))[0]
        cu, cv = int(u_ids[tied][pick]), int(v_ids[tied][pick])
        cd = float(d2[tied][pick])
        if cd > best_d2 + tie_band:
            best_d2, best_u, best_v = cd, cu, cv
        elif cd >= best_d2 - tie_band and (cu, cv) < (best_u, best_v):
            best_d2, best_u, best_v = max(cd, best_d2), cu, cv
    if best_u < 0:
        raise HullExhaustedError(
            "all member pairs excluded; rerun the hull with mu/2"
        )
    return best_u, best_v, best_d2
