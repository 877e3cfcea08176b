"""Dense pseudoinverse state, rank-1 maintenance, Laplacian solves, projections.

The dense backend keeps the Laplacian pseudoinverse and its square as a pair
of n x n arrays supporting O(n^2) edge insertions.  The iterative backend is
a Jacobi-preconditioned conjugate gradient on the all-ones-orthogonal
subspace with an energy-norm stopping rule, used for everything too large to
invert and for all sketch construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .graph import Graph, GraphError

DENSE_GUARD = 20_000
TOL_FLOOR = 1e-10


class SolverError(RuntimeError):
    """Iterative solve did not reach the requested tolerance.

    ``achieved`` carries the worst relative residual bound at the cap.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


# ---------------------------------------------------------------------------
# dense pseudoinverse state
# ---------------------------------------------------------------------------

class DenseSpectralState:
    """Maintained pair (L+, (L+)^2) for a connected graph.

    Mutated only through :meth:`add_edge` (or the raw update functions, in
    the documented order).  ``edge_codes`` tracks the current edge set so
    updates can reject existing edges.
    """

    __slots__ = ("n", "Lp", "Lp2", "edge_codes")

    def __init__(self, n, Lp, Lp2, edge_codes):
        self.n = n
        self.Lp = Lp
        self.Lp2 = Lp2
        self.edge_codes = edge_codes

    def has_edge(self, u, v):
        a, b = (u, v) if u < v else (v, u)
        code = a * self.n + b
        pos = np.searchsorted(self.edge_codes, code)
        return pos < self.edge_codes.size and self.edge_codes[pos] == code

    def check_candidate(self, u, v):
        u, v = int(u), int(v)
        if u == v:
            raise GraphError("endpoints must differ")
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise GraphError("endpoint out of range")
        if self.has_edge(u, v):
            raise GraphError(f"({u},{v}) is already an edge")
        return u, v

    def pair_diffs(self, u, v):
        """(L+ b, (L+)^2 b) for b = e_u - e_v, as two length-n vectors."""
        w = self.Lp[:, u] - self.Lp[:, v]
        z = self.Lp2[:, u] - self.Lp2[:, v]
        return w, z

    def add_edge(self, edge):
        """Insert a non-edge, updating (L+)^2 first and then L+.

        The squared-pseudoinverse update is written in terms of the
        pre-insertion L+, so the order is load-bearing.
        """
        u, v = self.check_candidate(*edge)
        w, z = self.pair_diffs(u, v)
        denom = 1.0 + (w[u] - w[v])
        if denom <= 0:
            raise GraphError("non-positive update denominator: corrupted state")
        s = z[u] - z[v]
        wz = np.outer(w, z)
        self.Lp2 += (s / denom**2) * np.outer(w, w)
        self.Lp2 -= (wz + wz.T) / denom
        self.Lp -= np.outer(w, w) / denom
        code = min(u, v) * self.n + max(u, v)
        pos = np.searchsorted(self.edge_codes, code)
        self.edge_codes = np.insert(self.edge_codes, pos, code)
        return self

    def copy(self):
        return DenseSpectralState(
            self.n, self.Lp.copy(), self.Lp2.copy(), self.edge_codes.copy()
        )


def laplacian_pinv(graph, guard=DENSE_GUARD):
    """Dense L+ via the rank-completion route (L + J/n)^{-1} - J/n,
    computed with a Cholesky factorization.
    """
    n = graph.n
    if n > guard:
        raise GraphError(
            f"n={n} exceeds the dense guard ({guard}); use the sketch path"
        )
    if not graph.is_connected():
        raise GraphError("dense pseudoinverse requires a connected graph")
    A = graph.laplacian().toarray()
    A += 1.0 / n
    cho = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    Lp = scipy.linalg.cho_solve(cho, np.eye(n), check_finite=False)
    Lp -= 1.0 / n
    return 0.5 * (Lp + Lp.T)


def pseudo_inverse(graph, guard=DENSE_GUARD):
    """Dense (L+, (L+)^2) state for a connected graph."""
    Lp = laplacian_pinv(graph, guard=guard)
    Lp2 = Lp @ Lp
    Lp2 = 0.5 * (Lp2 + Lp2.T)
    codes = graph.edges_u * graph.n + graph.edges_v
    return DenseSpectralState(graph.n, Lp, Lp2, codes.copy())


def sm_update_pinv(state, edge):
    """Rank-1 update of L+ after inserting ``edge``.

    Leaves ``edge_codes`` untouched; :meth:`DenseSpectralState.add_edge` is
    the bookkeeping-complete path.
    """
    u, v = state.check_candidate(*edge)
    w = state.Lp[:, u] - state.Lp[:, v]
    denom = 1.0 + (w[u] - w[v])
    if denom <= 0:
        raise GraphError("non-positive update denominator: corrupted state")
    state.Lp -= np.outer(w, w) / denom
    return state


def sm_update_pinv2(state, edge):
    """Rank-2 correction of (L+)^2 after inserting ``edge``.

    Must run against the pre-insertion L+ (call before ``sm_update_pinv``).
    """
    u, v = state.check_candidate(*edge)
    w, z = state.pair_diffs(u, v)
    denom = 1.0 + (w[u] - w[v])
    if denom <= 0:
        raise GraphError("non-positive update denominator: corrupted state")
    s = z[u] - z[v]
    wz = np.outer(w, z)
    state.Lp2 += (s / denom**2) * np.outer(w, w)
    state.Lp2 -= (wz + wz.T) / denom
    return state


# ---------------------------------------------------------------------------
# iterative Laplacian solver
# ---------------------------------------------------------------------------

def fiedler_value(graph):
    """Algebraic connectivity estimate, cached on the graph.

    Exact (dense eigensolve) up to n=2048; above that a short LOBPCG run with
    the all-ones vector deflated, shrunk by a safety factor so the solver's
    error bound stays conservative.  Returns ``(value, exact)``.
    """
    if graph._lambda2 is not None:
        return graph._lambda2
    n = graph.n
    if n == 1:
        result = (0.0, True)
    elif n <= 2048:
        vals = scipy.linalg.eigvalsh(graph.laplacian().toarray())
        result = (float(vals[1]), True)
    else:
        L = graph.laplacian()
        rng = np.random.default_rng(12345)
        x0 = rng.standard_normal((n, 1))
        x0 -= x0.mean()
        ones = np.ones((n, 1))
        try:
            vals, _ = scipy.sparse.linalg.lobpcg(
                L, x0, Y=ones, largest=False, tol=1e-3, maxiter=200
            )
            lam = float(vals[0])
        except Exception:
            lam = 0.0
        if not np.isfinite(lam) or lam <= 0:
            lam = 4.0 / n**2  # coarse universal lower bound for connected graphs
        result = (0.5 * lam, False)
    graph._lambda2 = result
    return result


@dataclass
class BlockSolveInfo:
    iterations: int
    tol: float
    floored: bool


def _iteration_cap(graph, lam2):
    dmax = int(graph.degrees().max(initial=1))
    kappa = max(2.0 * dmax / max(lam2, 1e-300), 1.0)
    return int(20.0 * math.sqrt(kappa)) + 200


def lap_solve_block(graph, B, tol, dtype=np.float64):
    """Solve L X = B column-by-column with Jacobi-PCG on the subspace
    orthogonal to the all-ones vector.

    Each column stops once the energy-norm error bound
    ``||r|| / sqrt(lam2)`` drops below ``tol`` times a lower bound on
    ``||L+ b||_L``.  Returns ``(X, BlockSolveInfo)``.

    Raises
    ------
    SolverError
        If any column misses the tolerance within the iteration cap.
    """
    n = graph.n
    B = np.asarray(B, dtype=dtype)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    if B.shape[0] != n:
        raise GraphError("right-hand side has wrong length")
    floored = tol < TOL_FLOOR
    tol = max(float(tol), TOL_FLOOR)

    lam2, _ = fiedler_value(graph)
    lam2 = max(lam2, 1e-300)
    dmax = int(graph.degrees().max(initial=1))
    lam_max = 2.0 * dmax
    cap = _iteration_cap(graph, lam2)
    L = graph.laplacian()
    if dtype == np.float32:
        L = L.astype(np.float32)
    inv_diag = (1.0 / np.maximum(graph.degrees(), 1)).astype(dtype)

    b_ref = np.einsum("ij,ij->j", B, B, dtype=np.float64)
    B = B - B.mean(axis=0, keepdims=True)
    k = B.shape[1]
    X_out = np.zeros((n, k), dtype=dtype)
    b_norm2 = np.einsum("ij,ij->j", B, B, dtype=np.float64)
    # columns that were (numerically) constant project to zero: x = 0
    active = np.flatnonzero(b_norm2 > 1e-26 * np.maximum(b_ref, 1e-300))
    if active.size == 0:
        return (X_out[:, 0] if squeeze else X_out), BlockSolveInfo(0, tol, floored)
    eps = float(np.finfo(dtype).eps)

    Bc = np.ascontiguousarray(B[:, active])
    X = np.zeros_like(Bc)
    R = Bc.copy()
    Z = R * inv_diag[:, None]
    P = Z.copy()
    rz = np.einsum("ij,ij->j", R, Z, dtype=np.float64)
    cols = active.copy()
    base_floor = b_norm2[active] / lam_max  # lower bound on b^T L+ b
    b_active = b_norm2[active]

    it = 0
    while True:
        it += 1
        Q = L @ P
        pq = np.einsum("ij,ij->j", P, Q, dtype=np.float64)
        alpha = rz / np.maximum(pq, 1e-300)
        X += alpha * P
        R -= alpha * Q
        if it % 50 == 0:
            X -= X.mean(axis=0, keepdims=True)
            R -= R.mean(axis=0, keepdims=True)

        r_norm2 = np.einsum("ij,ij->j", R, R, dtype=np.float64)
        x_lx = np.einsum("ij,ij->j", X, Bc - R, dtype=np.float64)
        target2 = tol**2 * lam2 * np.maximum(x_lx, base_floor)
        # residuals at machine precision cannot improve further
        done = (
            (r_norm2 <= target2)
            | (r_norm2 <= (64.0 * eps) ** 2 * b_active)
            | (pq <= 0)
        )
        if done.all():
            X_out[:, cols] = X
            break
        if it >= cap:
            bad = ~done
            worst = float(
                np.sqrt(
                    (r_norm2[bad] / (lam2 * np.maximum(x_lx, base_floor)[bad])).max()
                )
            )
            raise SolverError(
                f"no convergence in {cap} iterations "
                f"(worst relative energy-norm bound {worst:.3e}, tol {tol:.3e})",
                achieved=worst,
            )
        if done.any():
            X_out[:, cols[done]] = X[:, done]
            keep = ~done
            cols = cols[keep]
            Bc = np.ascontiguousarray(Bc[:, keep])
            X = np.ascontiguousarray(X[:, keep])
            R = np.ascontiguousarray(R[:, keep])
            P = np.ascontiguousarray(P[:, keep])
            rz = rz[keep]
            base_floor = base_floor[keep]
            b_active = b_active[keep]
        Z = R * inv_diag[:, None]
        rz_new = np.einsum("ij,ij->j", R, Z, dtype=np.float64)
        beta = rz_new / np.maximum(rz, 1e-300)
        rz = rz_new
        P = Z + beta * P

    X_out -= X_out.mean(axis=0, keepdims=True)
    info = BlockSolveInfo(it, tol, floored)
    return (X_out[:, 0] if squeeze else X_out), info


def lap_solve(graph, b, tol):
    """Approximate x = L+ b with relative energy-norm error ``tol``.

    The right-hand side is projected onto the subspace orthogonal to the
    all-ones vector, and the returned vector is orthogonal to it as well.
    """
    x, _ = lap_solve_block(graph, np.asarray(b, dtype=np.float64), tol)
    return x


# ---------------------------------------------------------------------------
# random sign projections
# ---------------------------------------------------------------------------

class SignProjection:
    """t x cols matrix with entries +-1/sqrt(t), bit-packed.

    Deterministic given ``seed``; rows are drawn independently.
    """

    __slots__ = ("t", "cols", "seed", "_bits")

    def __init__(self, t, cols, seed, bits):
        self.t = t
        self.cols = cols
        self.seed = seed
        self._bits = bits

    @property
    def scale(self):
        return 1.0 / math.sqrt(self.t)

    def row_block(self, lo, hi, dtype=np.float64):
        """Rows lo:hi as a dense array of +-1/sqrt(t)."""
        raw = np.unpackbits(self._bits[lo:hi], axis=1, count=self.cols)
        out = raw.astype(dtype)
        out *= 2.0 * self.scale
        out -= self.scale
        return out

    def dense(self, dtype=np.float64):
        return self.row_block(0, self.t, dtype=dtype)

    def matvec(self, vec, chunk=256):
        """Q @ vec without materializing the dense matrix."""
        vec = np.asarray(vec, dtype=np.float64)
        out = np.empty(self.t, dtype=np.float64)
        for lo in range(0, self.t, chunk):
            hi = min(self.t, lo + chunk)
            out[lo:hi] = self.row_block(lo, hi) @ vec
        return out


def jl_matrix(t, cols, seed):
    """Random sign projection with ``t`` rows over ``cols`` coordinates."""
    if t < 1:
        raise ValueError("t must be >= 1")
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, 2, size=(t, cols), dtype=np.uint8)
    bits = np.packbits(raw, axis=1)
    return SignProjection(t, cols, seed, bits)


def child_seed(seed, *key):
    """Stable derived seed for per-round randomness."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
