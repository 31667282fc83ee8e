import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glocalkd.errors import FeatureShapeMismatch, OutOfRangeEndpoint, SelfLoopRejected
from glocalkd.graph import build_graph, degree_features, normalized_adjacency


def dense_norm_adj_oracle(n, edges):
    """Entrywise (A+I)(i,j) / sqrt(d~_i d~_j), built with plain loops."""
    a = [[0.0] * n for _ in range(n)]
    for i, j in edges:
        a[i][j] = a[j][i] = 1.0
    for i in range(n):
        a[i][i] += 1.0
    deg = [sum(row) for row in a]
    return np.array([[a[i][j] / (deg[i] * deg[j]) ** 0.5 for j in range(n)] for i in range(n)])


@st.composite
def graphs(draw, max_nodes=9):
    n = draw(st.integers(1, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return build_graph(n, edges)


class TestBuildGraph:
    def test_minimal(self):
        g = build_graph(1, [])
        assert g.num_nodes == 1
        assert g.edges == ()
        assert g.features is None

    def test_dedup_symmetric_pair(self):
        g = build_graph(3, [(0, 1), (1, 0), (1, 2)])
        assert g.edges == ((0, 1), (1, 2))

    def test_out_of_range(self):
        with pytest.raises(OutOfRangeEndpoint):
            build_graph(2, [(0, 2)])

    def test_negative_endpoint(self):
        with pytest.raises(OutOfRangeEndpoint):
            build_graph(2, [(-1, 0)])

    def test_self_loop(self):
        with pytest.raises(SelfLoopRejected):
            build_graph(2, [(1, 1)])

    def test_feature_rows(self):
        with pytest.raises(FeatureShapeMismatch):
            build_graph(3, [], np.ones((2, 4)))

    def test_features_immutable(self):
        g = build_graph(2, [(0, 1)], [[1.0], [2.0]])
        with pytest.raises(ValueError):
            g.features[0, 0] = 5.0


class TestNormalizedAdjacency:
    def test_single_node(self):
        np.testing.assert_array_equal(normalized_adjacency(build_graph(1, [])), [[1.0]])

    def test_single_edge(self):
        np.testing.assert_allclose(
            normalized_adjacency(build_graph(2, [(0, 1)])), [[0.5, 0.5], [0.5, 0.5]], rtol=0, atol=1e-15
        )

    def test_path_matches_oracle(self):
        g = build_graph(3, [(0, 1), (1, 2)])
        np.testing.assert_allclose(
            normalized_adjacency(g), dense_norm_adj_oracle(3, g.edges), rtol=0, atol=1e-15
        )

    def test_regular_graph(self):
        # 6-cycle is 2-regular: every nonzero entry is 1/3
        g = build_graph(6, [(i, (i + 1) % 6) for i in range(6)])
        a = normalized_adjacency(g)
        mask = (g.adjacency + np.eye(6)) > 0
        np.testing.assert_allclose(a[mask], 1 / 3, rtol=1e-14)
        assert np.all(a[~mask] == 0)

    @given(graphs())
    @settings(max_examples=60, deadline=None)
    def test_properties(self, g):
        a = normalized_adjacency(g)
        np.testing.assert_array_equal(a, a.T)
        assert np.all(np.diag(a) > 0)
        np.testing.assert_allclose(a, dense_norm_adj_oracle(g.num_nodes, g.edges), atol=1e-14)

    @given(graphs(), st.randoms(use_true_random=False))
    @settings(max_examples=40, deadline=None)
    def test_permutation_equivariance(self, g, rnd):
        perm = list(range(g.num_nodes))
        rnd.shuffle(perm)
        h = build_graph(g.num_nodes, [(perm[i], perm[j]) for i, j in g.edges])
        p = np.eye(g.num_nodes)[perm].T  # p @ e_i = e_perm[i]
        np.testing.assert_allclose(normalized_adjacency(h), p @ normalized_adjacency(g) @ p.T, atol=1e-15)


class TestDegreeFeatures:
    def test_isolated(self):
        np.testing.assert_array_equal(degree_features(build_graph(1, []), 2), [[1, 0, 0]])

    def test_star_center(self):
        g = build_graph(4, [(0, 1), (0, 2), (0, 3)])
        np.testing.assert_array_equal(degree_features(g, 3)[0], [0, 0, 0, 1])

    def test_clamping(self):
        g = build_graph(6, [(0, k) for k in range(1, 6)])
        np.testing.assert_array_equal(degree_features(g, 3)[0], [0, 0, 0, 1])

    @given(graphs(), st.integers(0, 5))
    @settings(max_examples=40, deadline=None)
    def test_rows_sum_to_one(self, g, md):
        np.testing.assert_array_equal(degree_features(g, md).sum(axis=1), 1.0)
