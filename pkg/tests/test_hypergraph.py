import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lean_tvr.errors import DimensionError, GraphError
from lean_tvr.hypergraph import (EdgeKind, build_hyperedges, build_incidence, build_nodes, degrees,
                                 normalized_adjacency, pair_structure, select_keyframes)

sizes = st.tuples(st.integers(1, 8), st.integers(1, 8))


class TestKeyframes:
    def test_identical_frames_lowest_index(self):
        assert select_keyframes(np.ones((5, 3)), 3) == [0, 1, 2]

    def test_fewer_frames_than_requested(self):
        assert select_keyframes(np.random.default_rng(0).random((2, 4)), 5) == [0, 1]

    def test_two_clusters(self, gen):
        a = gen.normal(0.0, 0.01, (4, 3))
        b = gen.normal(10.0, 0.01, (4, 3))
        raw = np.vstack([a, b])[gen.permutation(8)]
        picked = select_keyframes(raw, 2)
        centers = raw[picked].mean(axis=1)
        assert sorted(centers > 5) == [False, True]

    def test_matches_brute_force_farthest_point(self, gen):
        raw = gen.standard_normal((9, 4))
        chosen = [0]
        for _ in range(3):
            dist = [min(np.linalg.norm(raw[i] - raw[c]) for c in chosen) if i not in chosen else -1
                    for i in range(9)]
            chosen.append(int(np.argmax(dist)))
        assert select_keyframes(raw, 4) == chosen

    def test_bad_count(self):
        with pytest.raises(GraphError):
            select_keyframes(np.ones((3, 2)), 0)


class TestNodes:
    def test_global_is_column_mean(self):
        ns = build_nodes(np.ones((1, 2)), np.array([[1.0, 1.0], [3.0, 3.0]]), np.eye(2), np.eye(2))
        np.testing.assert_allclose(ns.video_global, [2.0, 2.0])
        np.testing.assert_allclose(ns.features()[0], [2.0, 2.0])

    def test_single_frame(self, gen):
        pv = gen.standard_normal((3, 2))
        frame = gen.standard_normal((1, 3))
        ns = build_nodes(np.ones((2, 4)), frame, np.ones((4, 2)), pv)
        np.testing.assert_allclose(ns.video_global, (frame @ pv)[0])

    def test_text_dim_mismatch(self):
        with pytest.raises(DimensionError):
            build_nodes(np.ones((2, 5)), np.ones((2, 3)), np.ones((4, 2)), np.ones((3, 2)))

    def test_order(self, gen):
        ns = build_nodes(np.eye(3)[:2], np.eye(3), np.eye(3), np.eye(3))
        np.testing.assert_allclose(ns.features()[1:4], np.eye(3))
        np.testing.assert_allclose(ns.features()[4:], np.eye(3)[:2])


class TestEdges:
    def test_hand_enumeration_2_2(self):
        edges = build_hyperedges(2, 2)
        # node order V=0, I1=1, I2=2, w1=3, w2=4
        assert [set(e.members) for e in edges] == [
            {0, 1, 2, 3, 4}, {3, 4}, {0, 1, 2}, {3, 0, 1, 2}, {4, 0, 1, 2}]
        assert [e.kind for e in edges] == [EdgeKind.GLOBAL, EdgeKind.INTRA_TEXT,
                                           EdgeKind.INTRA_VISUAL, EdgeKind.CROSS_MODAL,
                                           EdgeKind.CROSS_MODAL]

    def test_one_one(self):
        assert len(build_hyperedges(1, 1)) == 4

    def test_no_words(self):
        with pytest.raises(GraphError):
            build_hyperedges(0, 2)

    @given(sizes)
    def test_counts(self, nm):
        n, m = nm
        st_ = pair_structure(n, m)
        assert st_.n_edges == n + 3 and st_.n_nodes == 1 + m + n


class TestIncidenceDegrees:
    def test_eighteen_ones(self):
        h = build_incidence(5, build_hyperedges(2, 2))
        assert h.sum() == 18
        assert set(np.unique(h)) <= {0.0, 1.0}

    @given(sizes)
    def test_column_sizes(self, nm):
        n, m = nm
        cols = pair_structure(n, m).incidence.sum(axis=0)
        # IntraText holds exactly the n words, so a single word makes a one-member edge
        assert cols[1] == n
        assert cols[0] == 1 + m + n and cols[2] == 1 + m
        assert np.all(cols[3:] == m + 2)

    def test_degree_oracle(self):
        h = build_incidence(5, build_hyperedges(2, 2))
        d_d, d_e = degrees(h, np.ones(5))
        np.testing.assert_array_equal(d_d, [4, 4, 4, 3, 3])
        np.testing.assert_array_equal(d_e, [5, 2, 3, 4, 4])

    def test_single(self):
        d_d, d_e = degrees(np.ones((1, 1)), np.ones(1))
        assert d_d.tolist() == [1.0] and d_e.tolist() == [1.0]

    def test_w_doubled(self, gen):
        h = pair_structure(3, 2).incidence
        w = gen.random(h.shape[1]) + 0.1
        a, b = degrees(h, w), degrees(h, 2 * w)
        np.testing.assert_allclose(b[0], 2 * a[0])
        np.testing.assert_array_equal(b[1], a[1])

    def test_row_and_column_sums(self):
        h = pair_structure(4, 3).incidence
        d_d, d_e = degrees(h, np.ones(h.shape[1]))
        np.testing.assert_array_equal(d_d, h.sum(axis=1))
        np.testing.assert_array_equal(d_e, h.sum(axis=0))

    def test_permutation_equivariant(self, gen):
        h = pair_structure(3, 3).incidence
        w = gen.random(h.shape[1]) + 0.5
        perm = gen.permutation(h.shape[0])
        np.testing.assert_allclose(degrees(h[perm], w)[0], degrees(h, w)[0][perm])

    def test_nonpositive_weight(self):
        with pytest.raises(GraphError):
            degrees(np.ones((2, 1)), np.zeros(1))

    def test_bad_member(self):
        from lean_tvr.hypergraph import Hyperedge
        with pytest.raises(GraphError):
            build_incidence(2, [Hyperedge(EdgeKind.GLOBAL, (0, 5))])


class TestAdjacency:
    def test_single(self):
        np.testing.assert_allclose(normalized_adjacency(np.ones((1, 1)), [1.0], [1.0], [1.0]), [[1.0]])

    def test_two_nodes_shared_edge(self):
        a = normalized_adjacency(np.ones((2, 1)), [1.0], [1.0, 1.0], [2.0])
        np.testing.assert_allclose(a, np.full((2, 2), 1 / np.sqrt(2)))

    @settings(max_examples=50)
    @given(sizes, st.integers(0, 2**31 - 1))
    def test_symmetric_psd(self, nm, seed):
        g = np.random.default_rng(seed)
        h = pair_structure(*nm).incidence
        w = np.exp(g.normal(size=h.shape[1]))
        a = normalized_adjacency(h, w, *degrees(h, w))
        assert np.max(np.abs(a - a.T)) <= 1e-12
        x = g.standard_normal((100, h.shape[0]))
        assert np.einsum("ki,ij,kj->k", x, a, x).min() >= -1e-9
