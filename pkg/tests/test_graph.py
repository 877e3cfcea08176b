import gzip
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kirchopt.graph import (
    Graph,
    GraphError,
    eccentricities,
    largest_connected_component,
    load_edge_list,
    preferential_attachment_graph,
    prune_central_nodes,
    _eccentricities_bitset,
)

from oracles import eccentricity_oracle, random_connected_graph, path_graph, star_graph, cycle_graph


def connected_graphs(max_n=10):
    """Random tree plus extra edges: always connected."""

    @st.composite
    def build(draw):
        n = draw(st.integers(2, max_n))
        parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
        edges = {(p, i) for i, p in enumerate(parents, start=1)}
        extra = draw(st.integers(0, n))
        for _ in range(extra):
            u = draw(st.integers(0, n - 1))
            v = draw(st.integers(0, n - 1))
            if u != v:
                edges.add((min(u, v), max(u, v)))
        return Graph(n, sorted(edges))

    return build()


class TestConstruction:
    def test_rejects_self_loop(self):
        with pytest.raises(GraphError):
            Graph(3, [(0, 0)])

    def test_rejects_duplicate(self):
        with pytest.raises(GraphError):
            Graph(3, [(0, 1), (1, 0)])

    def test_rejects_out_of_range(self):
        with pytest.raises(GraphError):
            Graph(3, [(0, 5)])

    def test_neighbors_sorted(self):
        g = Graph(4, [(2, 0), (0, 3), (0, 1)])
        assert list(g.neighbors(0)) == [1, 2, 3]

    def test_has_edge(self):
        g = Graph(3, [(0, 1)])
        assert g.has_edge(0, 1) and g.has_edge(1, 0)
        assert not g.has_edge(0, 2)

    def test_with_edges_rejects_existing(self):
        g = Graph(3, [(0, 1)])
        with pytest.raises(GraphError):
            g.with_edges([(1, 0)])

    @given(connected_graphs())
    @settings(max_examples=30, deadline=None)
    def test_adjacency_invariants(self, g):
        degs = g.degrees()
        assert g.m == degs.sum() // 2
        for u, v in zip(g.edges_u, g.edges_v):
            assert u < v
            assert v in g.neighbors(u) and u in g.neighbors(v)


class TestLoadEdgeList:
    def test_p3(self):
        g, rep = load_edge_list(io.StringIO("0 1\n1 2"))
        assert (g.n, g.m) == (3, 2)
        assert rep.dropped_self_loops == 0 and rep.dropped_duplicates == 0

    def test_cleaning(self):
        g, rep = load_edge_list(io.StringIO("5 9\n9 5\n5 5\n9 7"))
        assert (g.n, g.m) == (3, 2)
        assert rep.dropped_self_loops == 1
        assert rep.dropped_duplicates == 1
        # labels remapped in sorted order
        assert list(g.original_labels) == [5, 7, 9]

    def test_comments_and_blanks(self):
        g, _ = load_edge_list(io.StringIO("# c\n% c\n\n0 1\n"))
        assert (g.n, g.m) == (2, 1)

    def test_malformed_line_number(self):
        with pytest.raises(GraphError, match="line 2"):
            load_edge_list(io.StringIO("0 1\n0 1 2\n"))

    def test_non_integer(self):
        with pytest.raises(GraphError, match="line 1"):
            load_edge_list(io.StringIO("a b\n"))

    def test_empty(self):
        with pytest.raises(GraphError, match="empty"):
            load_edge_list(io.StringIO("# only comments\n"))

    def test_gzip(self, tmp_path):
        path = tmp_path / "g.txt.gz"
        with gzip.open(path, "wt") as fh:
            fh.write("0 1\n1 2\n")
        g, _ = load_edge_list(path)
        assert (g.n, g.m) == (3, 2)


class TestLCC:
    def test_two_triangles_and_edge(self):
        edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (6, 7)]
        g = Graph(8, edges)
        lcc = largest_connected_component(g)
        assert (lcc.n, lcc.m) == (3, 3)

    def test_tie_break_smallest_label(self):
        # two components of equal size; keep the one holding label 0
        g = Graph(6, [(3, 4), (4, 5), (0, 1), (1, 2)])
        lcc = largest_connected_component(g)
        assert set(lcc.original_labels) == {0, 1, 2}

    def test_connected_identity(self, c5):
        assert largest_connected_component(c5) is c5

    @given(connected_graphs())
    @settings(max_examples=20, deadline=None)
    def test_idempotent(self, g):
        once = largest_connected_component(g)
        twice = largest_connected_component(once)
        assert (twice.n, twice.m) == (once.n, once.m)
        assert np.array_equal(
            twice.original_labels, once.original_labels
        )


class TestEccentricities:
    def test_p3(self, p3):
        assert list(eccentricities(p3)) == [2, 1, 2]

    def test_star(self, s4):
        assert list(eccentricities(s4)) == [1, 2, 2, 2]

    def test_disconnected_errors(self):
        g = Graph(4, [(0, 1), (2, 3)])
        with pytest.raises(GraphError):
            eccentricities(g)

    def test_random_vs_bfs_oracle(self, rng):
        g = random_connected_graph(50, 0.1, rng)
        assert np.array_equal(eccentricities(g), eccentricity_oracle(g))

    def test_bitset_path_matches(self, rng):
        g = random_connected_graph(80, 0.08, rng)
        ref = eccentricity_oracle(g)
        got = _eccentricities_bitset(g, np.arange(g.n), word_sources=30)
        assert np.array_equal(ref, got)

    @given(connected_graphs(8))
    @settings(max_examples=25, deadline=None)
    def test_adjacent_differ_by_at_most_one(self, g):
        ecc = eccentricities(g)
        for u, v in zip(g.edges_u, g.edges_v):
            assert abs(int(ecc[u]) - int(ecc[v])) <= 1


class TestPruning:
    def test_p3(self, p3):
        assert list(prune_central_nodes(p3, eccentricities(p3))) == [0, 2]

    def test_cycle_plateau(self, c4):
        assert list(prune_central_nodes(c4, eccentricities(c4))) == [0, 1, 2, 3]

    def test_star_keeps_leaves(self, s4):
        assert list(prune_central_nodes(s4, eccentricities(s4))) == [1, 2, 3]

    def test_mismatched_table(self, p3):
        with pytest.raises(GraphError):
            prune_central_nodes(p3, np.zeros(5))

    @given(connected_graphs())
    @settings(max_examples=30, deadline=None)
    def test_max_ecc_survives_and_nonempty(self, g):
        ecc = eccentricities(g)
        kept = prune_central_nodes(g, ecc)
        assert kept.size >= 1
        assert set(np.flatnonzero(ecc == ecc.max())) <= set(kept)


class TestPreferentialAttachment:
    def test_shape_and_connectivity(self):
        g = preferential_attachment_graph(500, 4, seed=1)
        assert g.n == 500
        assert g.m == 4 + 4 * (500 - 5)
        assert g.is_connected()

    def test_deterministic(self):
        a = preferential_attachment_graph(100, 3, seed=9)
        b = preferential_attachment_graph(100, 3, seed=9)
        assert np.array_equal(a.edge_array(), b.edge_array())

    def test_validation(self):
        with pytest.raises(GraphError):
            preferential_attachment_graph(3, 3)
