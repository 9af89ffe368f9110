import io
import json

import numpy as np
import pytest

from relgc import tensor as T
from relgc.checkpoint import load_checkpoint, save_checkpoint
from relgc.config import RunConfig, dump_config, load_config
from relgc.data import DatasetError, generate_sbm, generate_sparse_sbm, load_dataset, save_dataset
from relgc.graph import ConfigError
from relgc.train import Trainer, TrainingError, _converged, pretrain, train


def tiny_cfg(**kw):
    base = dict(n_clusters=3, ae_dims=(16, 8), gae_dims=(16, 8), m1=16, m2=3,
                epochs_ae=3, epochs_gae=3, epochs_joint=3, epochs=4, kmeans_restarts=3,
                lr=1e-3, seed=5)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def graph():
    return generate_sbm(n=36, d=10, seed=1)


def snapshot(state):
    return {k: t.data.copy() for k, t in state.named().items()}


class TestConfig:
    def test_defaults_match_published_settings(self):
        cfg = RunConfig()
        assert cfg.ae_dims == (128, 256, 512, 20) and cfg.gae_dims == (128, 256, 20)
        assert (cfg.alpha, cfg.eta, cfg.beta, cfg.eps, cfg.kappa) == (0.1, 0.2, 0.8, 5e3, 10)
        assert (cfg.m1, cfg.m2) == (256, 8)
        assert (cfg.epochs_ae, cfg.epochs_gae, cfg.epochs_joint, cfg.epochs) == (30, 30, 100, 300)

    def test_ini_round_trip(self, tmp_path):
        cfg = tiny_cfg(symmetric_relation=True, dataset="somewhere")
        dump_config(cfg, tmp_path / "c.ini")
        assert load_config(tmp_path / "c.ini") == cfg

    def test_sections_and_overrides(self, tmp_path):
        (tmp_path / "c.ini").write_text(
            "[model]\nae_dims = 64, 32\ngae_dims = 64 32\n[train]\nlr = 5e-5  # acm\nepochs = 7\n")
        cfg = load_config(tmp_path / "c.ini", {"epochs": 9, "seed": None})
        assert cfg.ae_dims == (64, 32) and cfg.lr == 5e-5 and cfg.epochs == 9 and cfg.seed == 0

    def test_unknown_key(self, tmp_path):
        (tmp_path / "c.ini").write_text("[run]\nlearning_rate = 1\n")
        with pytest.raises(ConfigError, match="learning_rate"):
            load_config(tmp_path / "c.ini")

    @pytest.mark.parametrize("kw", [{"eta": 1.0}, {"beta": 0.0}, {"kappa": -1},
                                    {"n_clusters": 1}, {"gae_dims": (16, 4)}])
    def test_validation(self, kw):
        with pytest.raises(ConfigError):
            tiny_cfg(**kw)

    def test_seed_streams(self):
        cfg = RunConfig(seed=7)
        assert len({cfg.stream(s) for s in ("model", "aug", "sample")}) == 3
        assert RunConfig(seed=7, aug_seed=3).stream("aug") == 3


class TestDataset:
    def test_round_trip(self, tmp_path, graph):
        save_dataset(tmp_path / "d", graph, {"n_clusters": 3})
        g2 = load_dataset(tmp_path / "d")
        assert np.array_equal(g2.x, graph.x)
        assert (g2.adj != graph.adj).nnz == 0
        assert np.array_equal(g2.labels, graph.labels)

    def test_parse_error_names_line(self, tmp_path):
        d = tmp_path / "d"
        d.mkdir()
        rows = ["1\t2\t3"] * 6 + ["1\t2"] + ["1\t2\t3"]
        (d / "attributes.tsv").write_text("\n".join(rows) + "\n")
        (d / "edges.tsv").write_text("0\t1\n")
        with pytest.raises(DatasetError, match="line 7"):
            load_dataset(d)

    def test_knn_manifest(self, tmp_path, rng):
        d = tmp_path / "d"
        d.mkdir()
        x = rng.normal(size=(12, 3))
        np.savetxt(d / "attributes.tsv", x, delimiter="\t")
        (d / "manifest.json").write_text(json.dumps({"knn": 5}))
        from relgc.graph import knn_graph
        assert (load_dataset(d).adj != knn_graph(load_dataset(d).x, 5)).nnz == 0

    def test_mixed_edge_listing_warns(self, tmp_path, rng):
        d = tmp_path / "d"
        d.mkdir()
        np.savetxt(d / "attributes.tsv", rng.normal(size=(3, 2)), delimiter="\t")
        (d / "edges.tsv").write_text("0\t1\n1\t0\n1\t2\n")
        with pytest.warns(UserWarning, match="symmetrized"):
            g = load_dataset(d)
        assert g.num_edges == 2

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nowhere"):
            load_dataset(tmp_path / "nowhere")

    def test_sbm_generator(self):
        g = generate_sbm(seed=3)
        assert g.n == 150 and g.d == 50 and set(np.bincount(g.labels)) == {50}
        same = g.labels[:, None] == g.labels[None, :]
        a = g.adj.toarray().astype(bool)
        inside = a[same].sum() / (same.sum() - 150)
        outside = a[~same].sum() / (~same).sum()
        assert 0.15 < inside < 0.25 and outside < 0.03

    def test_sparse_sbm_degree(self):
        g = generate_sparse_sbm(600, seed=0)
        assert 6 < 2 * g.num_edges / g.n < 11


class TestPretrain:
    def test_ae_loss_descends_and_outputs(self, graph):
        res = pretrain(graph, tiny_cfg(epochs_ae=15))
        ae = res.losses["ae"]
        assert ae[-1] <= ae[0] * 1.05
        assert res.z_fused.shape == (36, 8) and res.z_pre.shape == (36, 8)
        assert res.state.mu.shape == (3, 8)

    def test_deterministic(self, graph):
        a, b = pretrain(graph, tiny_cfg()), pretrain(graph, tiny_cfg())
        sa, sb = snapshot(a.state), snapshot(b.state)
        assert all(np.array_equal(sa[k], sb[k]) for k in sa)

    def test_joint_fusion_flag(self, graph):
        with_f = pretrain(graph, tiny_cfg()).state.fusion.delta.item()
        without = pretrain(graph, tiny_cfg(joint_fusion=False)).state.fusion.delta.item()
        assert without == 0.5 and with_f != 0.5

    def test_separate_centroids(self, graph):
        st = pretrain(graph, tiny_cfg(shared_centroids=False)).state
        assert st.mu_ae is not None and st.mu_gae is not None


class TestTrain:
    def test_trajectory_determinism(self, graph):
        runs = []
        for _ in range(2):
            cfg = tiny_cfg(epochs=5)
            tr = Trainer(graph, cfg)
            state = tr.pretrain().state
            traj = []
            tr.train(state, callback=lambda r: traj.append(snapshot(state)))
            runs.append(traj)
        assert len(runs[0]) == 5
        for a, b in zip(*runs):
            assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_losses_finite_and_reported(self, graph):
        buf = io.StringIO()
        state, reports, labels = train(graph, tiny_cfg(), metrics_log=buf)
        lines = [json.loads(l) for l in buf.getvalue().splitlines()]
        assert len(lines) == 4 and lines[0]["epoch"] == 0
        for r in reports:
            assert all(np.isfinite(v) for v in r.losses.values())
            assert 0 <= r.acc <= 1 and 0 <= r.mad <= 2
            assert r.losses["l_pr"] >= 0 and -4 <= r.losses["l_re"] <= 4
        assert labels.shape == (36,) and labels.max() < 3

    def test_checkpoint_round_trip_preserves_trajectory(self, graph, tmp_path):
        cfg = tiny_cfg(epochs=3)
        tr = Trainer(graph, cfg)
        state = tr.pretrain().state
        tr.train(state)
        save_checkpoint(tmp_path / "ck", state, cfg)
        tail = [r.losses for r in tr.train(state)]
        final = snapshot(state)

        loaded, cfg2 = load_checkpoint(tmp_path / "ck")
        assert cfg2 == cfg and loaded.epoch == 3
        resumed = [r.losses for r in Trainer(graph, cfg2).train(loaded)]
        assert resumed == tail
        assert all(np.array_equal(final[k], v) for k, v in snapshot(loaded).items())

    def test_checkpoint_bit_identical(self, graph, tmp_path):
        cfg = tiny_cfg()
        state = pretrain(graph, cfg).state
        save_checkpoint(tmp_path / "ck", state, cfg)
        loaded, _ = load_checkpoint(tmp_path / "ck")
        a, b = snapshot(state), snapshot(loaded)
        assert a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
        assert np.array_equal(state.z_pre, loaded.z_pre)
        manifest = json.loads((tmp_path / "ck" / "manifest.json").read_text())
        assert {"tensors", "epoch", "seeds", "config"} <= manifest.keys()

    def test_mini_batch_mode(self):
        g = generate_sbm(n=60, d=8, seed=2)
        cfg = tiny_cfg(batch_size=20, diffusion_topk=10, epochs=2)
        _, reports, labels = train(g, cfg)
        assert len(reports) == 2 and labels.shape == (60,)
        assert all(np.isfinite(r.losses["loss"]) for r in reports)

    def test_batches_cover_nodes_once(self, graph):
        tr = Trainer(graph, tiny_cfg(batch_size=10))
        batches = tr._batches(0)
        assert sorted(np.concatenate(batches).tolist()) == list(range(36))
        assert min(len(b) for b in batches) >= 4

    def test_nonfinite_loss_aborts_with_epoch(self, graph):
        cfg = tiny_cfg(epochs=1)
        tr = Trainer(graph, cfg)
        state = tr.pretrain().state
        state.mu = T.parameter(np.full(state.mu.shape, 1e200))
        with pytest.raises(TrainingError, match="epoch 0"):
            tr.train(state)

    def test_early_stop(self):
        assert _converged([5.0] * 30, 20, 1e-5)
        assert not _converged(list(np.linspace(10, 1, 30)), 20, 1e-5)

    def test_cluster_count_checks(self, graph):
        with pytest.raises(ConfigError):
            Trainer(graph, tiny_cfg(n_clusters=40))
