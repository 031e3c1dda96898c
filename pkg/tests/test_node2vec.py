import numpy as np
import pytest
from helpers import clique_bridge_graph, graph_of

from mmart.node2vec import (
    EmbeddingTable,
    Node2vecConfig,
    sample_walks,
    step_distribution,
    train_node2vec,
)

PATH_GRAPH = graph_of(("a", "b"), ("b", "c"))
TRIANGLE = graph_of(("a", "b"), ("b", "c"), ("a", "c"))


def small_config(**kwargs) -> Node2vecConfig:
    defaults = dict(
        walks_per_node=3,
        walk_length=10,
        window=3,
        negatives_per_positive=3,
        epochs=2,
        dim=16,
        seed=0,
    )
    defaults.update(kwargs)
    return Node2vecConfig(**defaults)


class TestStepDistribution:
    def test_sums_to_one_and_matches_hand_weights(self):
        # on the path graph, from (a -> b): return to a has weight 1/p,
        # c is at distance 2 from a so it gets 1/q
        neighbors, probs = step_distribution(PATH_GRAPH, "a", "b", p=2.0, q=4.0)
        assert neighbors == ("a", "c")
        np.testing.assert_allclose(probs, [0.5 / 0.75, 0.25 / 0.75], atol=1e-15)
        assert probs.sum() == pytest.approx(1.0, abs=1e-15)

    def test_triangle_distance_one_weight(self):
        # c is adjacent to the previous node a, so it keeps weight 1
        neighbors, probs = step_distribution(TRIANGLE, "a", "b", p=10.0, q=10.0)
        assert neighbors == ("a", "c")
        np.testing.assert_allclose(probs, [0.1 / 1.1, 1.0 / 1.1], atol=1e-15)


class TestWalks:
    def test_first_step_uniform_on_path(self):
        config = small_config(walks_per_node=10000, walk_length=2, window=2)
        walks = [w for w in sample_walks(PATH_GRAPH, config) if w[0] == "b"]
        assert len(walks) == 10000
        freq_a = sum(1 for w in walks if w[1] == "a") / len(walks)
        assert abs(freq_a - 0.5) <= 0.02

    def test_isolated_node_walk_is_itself(self):
        graph = graph_of(("a", "b"))
        lonely = type(graph).from_edges([("a", "b")], extra_nodes=["z"])
        config = small_config(walks_per_node=2, walk_length=5, window=2)
        walks = sample_walks(lonely, config)
        assert [w for w in walks if w[0] == "z"] == [["z"], ["z"]]

    def test_huge_p_and_q_never_return_on_triangle(self):
        config = small_config(p=1e9, q=1e9, walks_per_node=10000, walk_length=3, window=2)
        walks = [w for w in sample_walks(TRIANGLE, config) if w[:2] == ["a", "b"]]
        assert len(walks) > 3000
        freq_c = sum(1 for w in walks if w[2] == "c") / len(walks)
        assert freq_c >= 0.99

    def test_walk_lengths_bounded(self):
        config = small_config(walk_length=7)
        for walk in sample_walks(PATH_GRAPH, config):
            assert 1 <= len(walk) <= 7

    def test_deterministic_in_seed(self):
        config = small_config(seed=42)
        assert sample_walks(TRIANGLE, config) == sample_walks(TRIANGLE, config)
        other = small_config(seed=43)
        assert sample_walks(TRIANGLE, config) != sample_walks(TRIANGLE, other)


class TestTraining:
    def test_epochs_zero_keeps_initialization(self):
        config = small_config(epochs=0, dim=128)
        walks = sample_walks(TRIANGLE, config)
        table = train_node2vec(walks, TRIANGLE, config)
        again = train_node2vec(walks, TRIANGLE, config)
        bound = 0.5 / 128
        for node, vec in table.vectors.items():
            assert np.all(np.abs(vec) <= bound)
            np.testing.assert_array_equal(vec, again.vectors[node])

    def test_single_node_graph(self):
        graph = type(TRIANGLE).from_edges([], extra_nodes=["only"])
        config = small_config()
        table = train_node2vec(sample_walks(graph, config), graph, config)
        vec = table.vectors["only"]
        assert vec.shape == (16,) and np.all(np.isfinite(vec))
        assert np.all(np.abs(vec) <= 0.5 / 16)  # untrained: no pairs exist

    def test_homophily_on_bridged_cliques(self):
        graph = clique_bridge_graph()
        for seed in (0, 1):
            config = small_config(
                walks_per_node=5, walk_length=20, window=4, epochs=3, dim=32, seed=seed
            )
            table = train_node2vec(sample_walks(graph, config), graph, config)
            assert intra_inter_gap(table, graph) > 0

    def test_deterministic_and_finite(self):
        config = small_config()
        walks = sample_walks(TRIANGLE, config)
        t1 = train_node2vec(walks, TRIANGLE, config)
        t2 = train_node2vec(walks, TRIANGLE, config)
        for node in TRIANGLE.nodes:
            np.testing.assert_array_equal(t1.vectors[node], t2.vectors[node])
            assert np.all(np.isfinite(t1.vectors[node]))

    def test_feature_file_round_trip(self):
        config = small_config(epochs=1)
        table = train_node2vec(sample_walks(TRIANGLE, config), TRIANGLE, config)
        back = EmbeddingTable.from_feature_file(table.to_feature_file())
        assert back.dim == table.dim
        assert set(back.vectors) == set(table.vectors)


def intra_inter_gap(table: EmbeddingTable, graph) -> float:
    """Mean intra-clique cosine minus mean inter-clique cosine."""
    nodes = sorted(graph.nodes)
    vecs = np.stack([table.vectors[n] for n in nodes])
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    sims = vecs @ vecs.T
    communities = np.array([n[:2] for n in nodes])
    same = np.equal.outer(communities, communities)
    off = ~np.eye(len(nodes), dtype=bool)
    return float(sims[same & off].mean() - sims[~same].mean())


def test_config_validation():
    with pytest.raises(ValueError, match="window"):
        Node2vecConfig(window=50, walk_length=10)
    with pytest.raises(ValueError, match="positive"):
        Node2vecConfig(p=0.0)
    with pytest.raises(ValueError, match="epochs"):
        Node2vecConfig(epochs=-1)
