import numpy as np
import pytest

from relgc.augment import AugmentConfig, ViewMaker, delete_edges, make_views, perturb_attributes
from relgc.data import generate_sbm
from relgc.graph import ConfigError, adjacency_from_edges, normalize_adjacency


class TestPerturb:
    def test_zero_scale_is_exact_copy(self, rng):
        x = rng.normal(size=(5, 4))
        out = perturb_attributes(x, 0.0, 7)
        assert np.array_equal(out, x) and out is not x

    def test_seeded(self, rng):
        x = rng.normal(size=(5, 4))
        assert np.array_equal(perturb_attributes(x, 0.1, 3), perturb_attributes(x, 0.1, 3))

    def test_multiplier_mean(self):
        scale = 0.1
        mult = perturb_attributes(np.ones((1000, 1000)), scale, 0)
        assert abs(mult.mean() - 1.0) < 3 * scale / 1e3

    def test_negative_scale(self):
        with pytest.raises(ConfigError):
            perturb_attributes(np.ones((2, 2)), -0.1, 0)


class TestDeleteEdges:
    def test_zero_ratio_unchanged(self, rng):
        a = adjacency_from_edges(4, [[0, 1], [1, 2], [2, 3]])
        out = delete_edges(a, rng.normal(size=(4, 3)), 0.0)
        assert (out != a).nnz == 0

    def test_star_example(self):
        a = adjacency_from_edges(3, [[0, 1], [0, 2]])
        z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        out = delete_edges(a, z, 0.5).toarray()
        assert out[0, 1] == 1 and out[0, 2] == 0 and out[2, 0] == 0

    def test_contract_on_random_graphs(self, rng):
        for seed in range(5):
            g = generate_sbm(n=60, seed=seed)
            z = rng.normal(size=(60, 8))
            for ratio in (0.1, 0.3, 0.5):
                out = delete_edges(g.adj, z, ratio)
                assert (out != out.T).nnz == 0
                assert out.diagonal().sum() == 0
                assert out.max() <= 1
                removed = g.num_edges - out.nnz // 2
                assert 0 <= removed <= np.floor(ratio * g.num_edges)
                # only existing edges survive
                assert (out.multiply(g.adj) != out).nnz == 0

    def test_lowest_similarity_edges_go_first(self):
        # path 0-1-2-3; edge (2,3) joins orthogonal embeddings
        a = adjacency_from_edges(4, [[0, 1], [1, 2], [2, 3]])
        z = np.array([[1.0, 0.1], [1.0, 0.0], [1.0, 0.2], [0.0, 1.0]])
        out = delete_edges(a, z, 0.5).toarray()
        assert out[2, 3] == 0 and out[0, 1] == 1

    def test_zero_embedding_warns(self):
        a = adjacency_from_edges(3, [[0, 1], [1, 2]])
        z = np.array([[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        with pytest.warns(UserWarning, match="zero embedding"):
            delete_edges(a, z, 0.5)


class TestViews:
    @pytest.fixture
    def graph(self):
        return generate_sbm(n=40, d=6, seed=2)

    def test_shapes(self, graph, rng):
        v1, v2 = make_views(graph, rng.normal(size=(40, 4)), AugmentConfig())
        assert v1.x.shape == v2.x.shape == graph.x.shape
        assert v1.s.shape == v2.s.shape == (40, 40)
        assert np.all(np.isfinite(v2.s)) and np.all(np.isfinite(v1.s.data))

    def test_views_differ(self, graph, rng):
        vm = ViewMaker(graph, rng.normal(size=(40, 4)), AugmentConfig(seed=5))
        same = sum(np.array_equal(*(v.x for v in vm.views(e))) for e in range(1000))
        assert same == 0

    def test_identity_augmentations(self, graph, rng):
        cfg = AugmentConfig(perturb_scale=0.0, drop_ratio=0.0)
        v1, v2 = make_views(graph, rng.normal(size=(40, 4)), cfg)
        assert np.array_equal(v1.x, graph.x) and np.array_equal(v2.x, graph.x)
        assert (v1.s != graph.s).nnz == 0

    def test_reproducible_per_epoch(self, graph, rng):
        z = rng.normal(size=(40, 4))
        a = make_views(graph, z, AugmentConfig(seed=3), epoch=4)
        b = make_views(graph, z, AugmentConfig(seed=3), epoch=4)
        c = make_views(graph, z, AugmentConfig(seed=3), epoch=5)
        assert np.array_equal(a[0].x, b[0].x) and np.array_equal(a[1].x, b[1].x)
        assert not np.array_equal(a[0].x, c[0].x)

    def test_view_one_uses_deleted_edges(self, graph, rng):
        z = rng.normal(size=(40, 4))
        v1, _ = make_views(graph, z, AugmentConfig(drop_ratio=0.3))
        expected = normalize_adjacency(delete_edges(graph.adj, z, 0.3))
        assert np.abs(v1.s - expected).max() == 0

    @pytest.mark.parametrize("kw", [{"perturb_scale": -1}, {"drop_ratio": 1.0}, {"eta": 0.0}])
    def test_config_validation(self, kw):
        with pytest.raises(ConfigError):
            AugmentConfig(**kw)
