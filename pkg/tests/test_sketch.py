import numpy as np
import pytest

from kirchopt.graph import Graph, GraphError
from kirchopt.linalg import pseudo_inverse
from kirchopt.sketch import (
    apply_embedding_update,
    build_resistance_sketch,
    embed_nodes,
    load_embedding,
    query_biharmonic,
    query_resistance,
    save_embedding,
    sketch_cache_key,
    solver_tolerance,
    update_embedding,
)

from oracles import (
    complete_graph,
    non_edges,
    path_graph,
    pinv_oracle,
    random_connected_graph,
)


class TestSolverTolerance:
    def test_closed_form_value(self):
        spec = solver_tolerance(3, 1 / 3, 1 / 3)
        expected = (1 / 27) * np.sqrt(6 * (2 / 3) / (3 * 8 * (4 / 3)))
        assert spec.value == pytest.approx(expected, rel=1e-12)
        assert spec.value == pytest.approx(0.0131, abs=1e-4)
        assert not spec.floored

    def test_monotone_in_n(self):
        vals = [solver_tolerance(n, 0.2, 0.2).value for n in (3, 10, 50, 500)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_floor_binds_large_n(self):
        spec = solver_tolerance(10**6, 0.1, 0.1)
        assert spec.floored and spec.value == 1e-10

    def test_validation(self):
        with pytest.raises(ValueError):
            solver_tolerance(3, 1.5, 0.1)
        with pytest.raises(ValueError):
            solver_tolerance(1, 0.1, 0.1)


class TestResistanceSketch:
    def test_p3_band(self, p3):
        sk = build_resistance_sketch(p3, 0.1, seed=5)
        assert 1.8 <= query_resistance(sk, 0, 2) <= 2.2
        assert sk.t == int(np.ceil(np.log(3) / 0.05**2))

    def test_k4_band(self):
        g = complete_graph(4)
        sk = build_resistance_sketch(g, 0.5, seed=7)
        for u in range(4):
            for v in range(u + 1, 4):
                assert query_resistance(sk, u, v) == pytest.approx(0.5, rel=0.5)

    def test_deterministic(self, p3):
        a = build_resistance_sketch(p3, 0.2, seed=9)
        b = build_resistance_sketch(p3, 0.2, seed=9)
        np.testing.assert_array_equal(a.rows, b.rows)

    def test_symmetry_exact(self, p3):
        sk = build_resistance_sketch(p3, 0.2, seed=9)
        assert query_resistance(sk, 0, 2) == query_resistance(sk, 2, 0)

    def test_same_node_rejected(self, p3):
        sk = build_resistance_sketch(p3, 0.2, seed=9)
        with pytest.raises(GraphError):
            query_resistance(sk, 1, 1)

    def test_band_share_on_random_graph(self, rng):
        g = random_connected_graph(100, 0.08, rng)
        st = pseudo_inverse(g)
        cand = non_edges(g)
        us = np.array([e[0] for e in cand])
        vs = np.array([e[1] for e in cand])
        dL = np.diag(st.Lp)
        exact = dL[us] + dL[vs] - 2 * st.Lp[us, vs]
        shares = []
        for s in range(10):
            sk = build_resistance_sketch(g, 0.2, seed=100 + s)
            G = sk.gram()
            d = np.diag(G)
            est = d[us] + d[vs] - 2 * G[us, vs]
            shares.append(np.mean(np.abs(est / exact - 1) <= 0.2))
        assert np.mean(np.asarray(shares) >= 0.95) >= 0.95


class TestEmbedding:
    def test_p3_pair(self, p3):
        beta = 0.3
        emb = embed_nodes(p3, beta, solver_tolerance(3, beta, 0.3), seed=7, delta=0.3)
        assert query_biharmonic(emb, 0, 2) == pytest.approx(2.0, rel=0.6)
        assert emb.t == int(np.ceil(np.log(3) / beta**2))

    def test_shift_invariance(self, p3):
        emb = embed_nodes(p3, 0.3, 1e-8, seed=7)
        before = query_biharmonic(emb, 0, 2)
        emb.coords += 3.14  # constant shift cancels in differences
        assert query_biharmonic(emb, 0, 2) == pytest.approx(before, rel=1e-9)

    def test_k4_symmetry_spread(self):
        g = complete_graph(4)
        beta = delta = 0.2
        emb = embed_nodes(g, beta, solver_tolerance(4, beta, delta), seed=3, delta=delta)
        vals = [query_biharmonic(emb, u, v) for u in range(4) for v in range(u + 1, 4)]
        spread = (max(vals) - min(vals)) / min(vals)
        assert spread <= 2 * (beta + delta)

    def test_max_pair_error_fixed_seeds(self, rng):
        # the all-pairs max needs the lemma-scale row count, not the
        # pseudocode constant; c_jl=4 keeps the committed seeds deterministic
        g = random_connected_graph(200, 0.04, rng)
        st = pseudo_inverse(g)
        iu = np.triu_indices(200, k=1)
        dL2 = np.diag(st.Lp2)
        exact = dL2[iu[0]] + dL2[iu[1]] - 2 * st.Lp2[iu]
        beta = delta = 0.2
        for seed in (41, 42):
            emb = embed_nodes(
                g, beta, solver_tolerance(200, beta, delta), seed=seed,
                c_jl=4.0, delta=delta,
            )
            G = emb.gram()
            d = np.diag(G)
            est = d[iu[0]] + d[iu[1]] - 2 * G[iu]
            assert np.abs(est / exact - 1).max() <= beta + delta

    def test_relabeling_equivariance(self, rng):
        g = random_connected_graph(40, 0.15, rng)
        perm = rng.permutation(40)
        relabeled = Graph(40, np.column_stack([perm[g.edges_u], perm[g.edges_v]]))
        beta = delta = 0.15
        tol = solver_tolerance(40, beta, delta)
        emb_a = embed_nodes(g, beta, tol, seed=5, delta=delta)
        emb_b = embed_nodes(relabeled, beta, tol, seed=6, delta=delta)
        st = pseudo_inverse(g)
        for (u, v) in non_edges(g)[:20]:
            exact = st.Lp2[u, u] + st.Lp2[v, v] - 2 * st.Lp2[u, v]
            assert query_biharmonic(emb_a, u, v) == pytest.approx(
                exact, rel=beta + delta
            )
            assert query_biharmonic(emb_b, int(perm[u]), int(perm[v])) == pytest.approx(
                exact, rel=beta + delta
            )


class TestUpdateEmbedding:
    def test_p3_matches_fresh_k3(self, p3, k3):
        beta = delta = 0.2
        tol = solver_tolerance(3, beta, delta)
        emb = embed_nodes(p3, beta, tol, seed=11, delta=delta)
        update_embedding(emb, p3, (0, 2))
        fresh = embed_nodes(k3, beta, tol, seed=11, delta=delta)
        for u in range(3):
            for v in range(u + 1, 3):
                assert query_biharmonic(emb, u, v) == pytest.approx(
                    query_biharmonic(fresh, u, v), rel=2 * (beta + delta)
                )

    def test_pair_distance_shrinks(self, rng):
        g = random_connected_graph(50, 0.1, rng)
        emb = embed_nodes(g, 0.2, 1e-9, seed=13)
        e = non_edges(g)[0]
        before = query_biharmonic(emb, *e)
        update_embedding(emb, g, e, solver_tol0=1e-10)
        assert query_biharmonic(emb, *e) < before

    def test_tolerance_insensitivity(self, rng):
        g = random_connected_graph(50, 0.1, rng)
        e = non_edges(g)[3]
        results = []
        for tol0 in (1e-12, 1e-8):
            emb = embed_nodes(g, 0.2, 1e-10, seed=17)
            update_embedding(emb, g, e, solver_tol0=tol0)
            results.append(emb.coords.copy())
        assert np.abs(results[0] - results[1]).max() <= 1e-6

    def test_existing_edge_rejected(self, p3):
        emb = embed_nodes(p3, 0.3, 1e-8, seed=7)
        with pytest.raises(GraphError):
            update_embedding(emb, p3, (0, 1))

    def test_corrupted_direction_rejected(self, p3):
        emb = embed_nodes(p3, 0.3, 1e-8, seed=7)
        bad_y = np.array([-10.0, 0.0, 10.0])  # denominator 1 + (y_u - y_v) < 0
        with pytest.raises(GraphError):
            apply_embedding_update(emb, bad_y, (0, 2))

    def test_drift_over_ten_insertions(self, rng):
        g = random_connected_graph(100, 0.06, rng)
        beta = delta = 0.2
        tol = solver_tolerance(100, beta, delta)
        emb = embed_nodes(g, beta, tol, seed=23, delta=delta)
        cur = g
        for _ in range(10):
            e = non_edges(cur)[int(rng.integers(len(non_edges(cur))))]
            update_embedding(emb, cur, e)
            cur = cur.with_edges([e])
        fresh = embed_nodes(cur, beta, tol, seed=23, delta=delta)
        iu = np.triu_indices(100, k=1)
        for sk in (emb, fresh):
            assert sk.coords.shape == fresh.coords.shape
        G1, G2 = emb.gram(), fresh.gram()
        d1, d2 = np.diag(G1), np.diag(G2)
        p1 = d1[iu[0]] + d1[iu[1]] - 2 * G1[iu]
        p2 = d2[iu[0]] + d2[iu[1]] - 2 * G2[iu]
        assert np.abs(p1 / p2 - 1).max() <= 0.05

    def test_restricted_columns(self, rng):
        g = random_connected_graph(30, 0.2, rng)
        emb = embed_nodes(g, 0.2, 1e-9, seed=29)
        before = emb.coords.copy()
        e = non_edges(g)[0]
        cols = np.array([e[0], e[1], 5])
        update_embedding(emb, g, e, columns=cols)
        untouched = np.setdiff1d(np.arange(30), cols)
        np.testing.assert_array_equal(emb.coords[:, untouched], before[:, untouched])
        assert np.abs(emb.coords[:, cols] - before[:, cols]).max() > 0


class TestSerialization:
    def test_roundtrip(self, tmp_path, p3):
        emb = embed_nodes(p3, 0.3, 1e-8, seed=7)
        path = tmp_path / "emb.npz"
        save_embedding(path, emb)
        back = load_embedding(path)
        np.testing.assert_array_equal(back.coords, emb.coords)
        assert back.seed == emb.seed and back.t == emb.t
        assert query_biharmonic(back, 0, 2) == query_biharmonic(emb, 0, 2)

    def test_cache_key_sensitivity(self, p3, c4):
        k1 = sketch_cache_key(p3, "embed", 1, beta=0.1)
        assert k1 == sketch_cache_key(p3, "embed", 1, beta=0.1)
        assert k1 != sketch_cache_key(p3, "embed", 2, beta=0.1)
        assert k1 != sketch_cache_key(p3, "embed", 1, beta=0.2)
        assert k1 != sketch_cache_key(c4, "embed", 1, beta=0.1)
