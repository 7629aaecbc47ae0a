import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wskit import Architecture, act, from_matrices, random_group_element, random_weights
from wskit.equivlab import counterexample_wl
from wskit.errors import VariantMismatch
from wskit.graphs import (
    GMN,
    NG,
    build_graph,
    feature_hash,
    from_edges,
    graph_to_json,
    graphs_equal,
    relabel,
    wl_class_counts,
    wl_distinguishable,
    wl_refine,
)


def undirected(pairs):
    return [e for s, t in pairs for e in ((s, t), (t, s))]


class TestBuildGraph:
    @pytest.mark.parametrize(
        "variant, n_nodes, n_edges",
        [(GMN, 13, 66), (NG, 10, 48)],
    )
    def test_counts(self, variant, n_nodes, n_edges):
        G = build_graph(random_weights(Architecture((1, 4, 4, 1)), seed=0), variant)
        assert (G.n_nodes, G.n_edges) == (n_nodes, n_edges)
        assert G.has_all_reverse_edges()

    def test_feature_widths(self):
        arch = Architecture((2, 3, 1))
        v = random_weights(arch, c=2, seed=0)
        gmn, ng = build_graph(v, GMN), build_graph(v, NG)
        # layer one-hot (L + 1) plus node types: inputs, outputs, bias nodes (GMN), hidden
        assert gmn.node_dim == 3 + (2 + 1 + 2 + 1)
        assert ng.node_dim == 3 + (2 + 1 + 1) + 2
        # value (c) + layer one-hot (L) + direction (2) [+ param type (2)]
        assert gmn.edge_dim == 2 + 2 + 2 + 2
        assert ng.edge_dim == 2 + 2 + 2

    def test_edge_features_by_hand(self, tiny):
        G = build_graph(tiny, GMN)
        e = G.edge_dict()
        np.testing.assert_array_equal(e[(("n", 0, 0), ("n", 1, 1))], [2.0, 1, 0, 1, 0, 1, 0])
        np.testing.assert_array_equal(e[(("n", 2, 0), ("n", 1, 1))], [4.0, 0, 1, 0, 1, 1, 0])
        np.testing.assert_array_equal(e[(("b", 2), ("n", 2, 0))], [0.7, 0, 1, 1, 0, 0, 1])

    def test_ng_node_bias(self, tiny):
        nodes = build_graph(tiny, NG).node_dict()
        assert nodes[("n", 1, 1)][-1] == -0.3
        assert nodes[("n", 0, 0)][-1] == 0.0

    def test_direction_one_hot(self):
        G = build_graph(random_weights(Architecture((2, 3, 2)), seed=1), NG)
        d = G.edge_feats[:, -2:]
        np.testing.assert_array_equal(d.sum(axis=1), np.ones(G.n_edges))
        assert d[:, 0].sum() == d[:, 1].sum() == G.n_edges // 2

    def test_unknown_variant(self, tiny):
        with pytest.raises(VariantMismatch):
            build_graph(tiny, "gcn")

    def test_json_and_dot(self, tiny):
        G = build_graph(tiny, GMN)
        d = json.loads(graph_to_json(G))
        assert len(d["nodes"]) == G.n_nodes and len(d["edges"]) == G.n_edges
        assert G.to_dot().startswith("digraph")


class TestRelabel:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), variant=st.sampled_from([GMN, NG]))
    def test_equivariance(self, seed, variant):
        arch = Architecture((2, 3, 4, 1))
        v = random_weights(arch, seed=seed)
        g = random_group_element(arch, np.random.default_rng(seed))
        assert graphs_equal(build_graph(act(g, v), variant), relabel(build_graph(v, variant), g))

    def test_detects_change(self, tiny):
        other = from_matrices(tiny.arch, [[[1.0], [2.0]], [[3.0, 4.5]]], [[0.5, -0.3], [0.7]])
        assert not graphs_equal(build_graph(tiny), build_graph(other))


class TestWL:
    def test_triangle_vs_path(self):
        tri = from_edges(np.ones((3, 1)), undirected([(0, 1), (1, 2), (2, 0)]))
        path = from_edges(np.ones((3, 1)), undirected([(0, 1), (1, 2)]))
        assert wl_distinguishable(tri, path)

    def test_hexagon_vs_two_triangles(self):
        hexagon = from_edges(np.ones((6, 1)), undirected([(k, (k + 1) % 6) for k in range(6)]))
        two = from_edges(np.ones((6, 1)), undirected([(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]))
        assert not wl_distinguishable(hexagon, two)

    def test_isolated_nodes(self):
        G = from_edges(np.array([[0.0], [0.0], [1.0]]), np.zeros((0, 2)), np.zeros((0, 1)))
        res = wl_refine(G)
        assert res.n_classes == 2
        assert res.rounds_to_stabilize == 1

    def test_path_class_counts(self):
        path = from_edges(np.ones((5, 1)), undirected([(k, k + 1) for k in range(4)]))
        # ends, then next-to-ends, then the centre
        assert wl_class_counts(path) == [1, 2, 3, 3]

    def test_edge_features_matter(self):
        a = from_edges(np.ones((2, 1)), undirected([(0, 1)]), [[1.0], [1.0]])
        b = from_edges(np.ones((2, 1)), undirected([(0, 1)]), [[2.0], [2.0]])
        assert wl_distinguishable(a, b)
        assert not wl_distinguishable(a, b, use_edge_features=False)

    def test_negative_zero_folded(self):
        assert feature_hash([0.0, 1.0]) == feature_hash([-0.0, 1.0])
        assert feature_hash([0.0]) != feature_hash([1e-300])

    def test_counterexample_pair_not_distinguished(self):
        v, w = counterexample_wl()
        for variant in (GMN, NG):
            assert not wl_distinguishable(build_graph(v, variant), build_graph(w, variant))

    def test_changing_one_weight_is_distinguished(self):
        v, _ = counterexample_wl()
        W = [w[..., 0].copy() for w in v.W]
        W[1][0, 0] = 2.0
        changed = from_matrices(v.arch, W, [x[:, 0] for x in v.b])
        assert wl_distinguishable(build_graph(v), build_graph(changed))

    def test_invariant_under_group(self, rng):
        arch = Architecture((1, 4, 4, 1))
        v = random_weights(arch, seed=3)
        for _ in range(5):
            g = random_group_element(arch, rng)
            assert not wl_distinguishable(build_graph(v), build_graph(act(g, v)))
            assert wl_refine(build_graph(v)).histogram == wl_refine(build_graph(act(g, v))).histogram

    def test_variant_mismatch(self, tiny):
        with pytest.raises(VariantMismatch):
            wl_distinguishable(build_graph(tiny, GMN), build_graph(tiny, NG))
