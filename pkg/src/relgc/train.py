"""Pretraining, joint pretraining and the main self-supervised training loop."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np
import scipy.sparse as sp

from . import tensor as T
from .augment import AugmentConfig, ViewMaker
from .cluster import init_centroids, predict
from .config import RunConfig
from .graph import ConfigError, Graph, ppr_diffusion
from .metrics import MetricsReport, compute_metrics, mad
from .model import (Batch, ModelState, joint_forward, main_forward, pretrain_ae_loss,
                    pretrain_gae_loss, sub_block)
from .nets import ae_encode
from .relation import global_anchors, local_anchors, sampling_weights
from .tensor import AdamState

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class PretrainResult:
    state: ModelState
    z_fused: np.ndarray
    z_pre: np.ndarray
    losses: dict[str, list[float]] = field(default_factory=dict)


def topk_rows(u: np.ndarray, k: int) -> sp.csr_matrix:
    """Keep the k largest entries of each row of a dense matrix."""
    n = u.shape[0]
    k = min(k, n)
    cols = np.argsort(-u, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    vals = u[rows, cols.ravel()]
    return sp.csr_matrix((vals, (rows, cols.ravel())), shape=u.shape)


class Trainer:
    """Owns the graph-derived constants of one run and drives every phase."""

    def __init__(self, graph: Graph, cfg: RunConfig):
        self.graph = graph
        self.cfg = cfg
        self.k = cfg.n_clusters or (int(graph.labels.max()) + 1 if graph.labels is not None else 0)
        if self.k < 2:
            raise ConfigError("number of clusters unknown: set n_clusters")
        if self.k > graph.n:
            raise ConfigError(f"cannot form {self.k} clusters from {graph.n} nodes")
        self.s = graph.s
        self.s_dense = self.s.toarray()
        self.sx = np.asarray(self.s @ graph.x)
        self.degrees = graph.degrees()
        self.views: ViewMaker | None = None
        self.u: np.ndarray | None = None
        self.s2 = None
        self.local_table: np.ndarray | None = None

    # ------------------------------------------------------------ batching

    def _batches(self, epoch: int, shuffle: bool = True) -> list[np.ndarray | None]:
        n, b = self.graph.n, self.cfg.batch_size
        if b <= 0 or b >= n:
            return [None]
        order = np.arange(n)
        if shuffle:
            order = np.random.default_rng([self.cfg.stream("sample"), epoch, 1]).permutation(n)
        # a short tail would leave too few nodes for relations; fold it in
        cuts = list(range(0, n, b))
        if len(cuts) > 1 and n - cuts[-1] < max(2, self.cfg.m2 + 1):
            cuts.pop()
        return [order[c:e] for c, e in zip(cuts, cuts[1:] + [n])]

    def clean_batch(self, idx) -> Batch:
        if idx is None:
            return Batch(None, self.graph.x, self.s, self.s_dense, self.sx, self.s, self.s)
        s = sub_block(self.s, idx)
        x = self.graph.x[idx]
        return Batch(idx, x, s, s.toarray(), np.asarray(s @ x), s, s)

    def view_batch(self, idx) -> Batch:
        base = self.clean_batch(idx)
        base.s1 = sub_block(self.views.s1, idx)
        base.s2 = sub_block(self.s2, idx)
        return base

    # --------------------------------------------------------- pretraining

    def _fit(self, state: ModelState, groups, loss_fn, epochs: int, tag: str) -> list[float]:
        params = state.named(groups)
        adam = AdamState(lr=self.cfg.pretrain_lr)
        trace = []
        for epoch in range(epochs):
            total = 0.0
            for idx in self._batches(epoch):
                loss = loss_fn(self.clean_batch(idx))
                grads = T.backward(loss, params.values())
                T.adam_step(params, {k: grads[t] for k, t in params.items()}, adam)
                total += loss.item()
            trace.append(total)
            log.debug("%s epoch %d loss %.6g", tag, epoch, total)
        return trace

    def pretrain(self, state: ModelState | None = None) -> PretrainResult:
        cfg = self.cfg
        state = state or ModelState.init(self.graph.n, self.graph.d, cfg)
        losses = {
            "ae": self._fit(state, ("ae",), lambda b: pretrain_ae_loss(state, b),
                            cfg.epochs_ae, "pretrain-ae"),
            "gae": self._fit(state, ("gae",), lambda b: pretrain_gae_loss(state, b, cfg),
                             cfg.epochs_gae, "pretrain-gae"),
        }
        groups = ("ae", "gae", "fusion") if cfg.joint_fusion else ("ae", "gae")
        losses["joint"] = self._fit(state, groups,
                                    lambda b: joint_forward(state, b, cfg)["loss"],
                                    cfg.epochs_joint, "pretrain-joint")
        z_fused, z_ae, z_gae = self.joint_embeddings(state)
        self.init_clusters(state, z_fused, z_ae, z_gae)
        state.z_pre = ae_encode(self.graph.x, state.ae).data
        return PretrainResult(state, z_fused, state.z_pre, losses)

    def joint_embeddings(self, state: ModelState):
        parts = [[], [], []]
        order = []
        for idx in self._batches(0, shuffle=False):
            out = joint_forward(state, self.clean_batch(idx), self.cfg)
            for slot, key in zip(parts, ("z_t", "z_ae", "z_gae")):
                slot.append(out[key].data)
            order.append(np.arange(self.graph.n) if idx is None else idx)
        order = np.concatenate(order)
        result = []
        for slot in parts:
            z = np.empty((self.graph.n, slot[0].shape[1]))
            z[order] = np.concatenate(slot)
            result.append(z)
        return tuple(result)

    def init_clusters(self, state: ModelState, z_fused, z_ae, z_gae) -> None:
        cfg = self.cfg
        seed = cfg.stream("model")
        state.mu = T.parameter(init_centroids(z_fused, self.k, seed, cfg.kmeans_restarts))
        if not cfg.shared_centroids:
            state.mu_ae = T.parameter(init_centroids(z_ae, self.k, seed + 1, cfg.kmeans_restarts))
            state.mu_gae = T.parameter(init_centroids(z_gae, self.k, seed + 2, cfg.kmeans_restarts))

    # -------------------------------------------------------- main training

    def prepare(self, z_pre: np.ndarray) -> None:
        """Build the augmentation operators from the pretrained AE embedding."""
        cfg = self.cfg
        aug = AugmentConfig(cfg.perturb_scale, cfg.drop_ratio, cfg.eta, cfg.stream("aug"))
        self.u = ppr_diffusion(self.s, cfg.eta)
        self.views = ViewMaker(self.graph, z_pre, aug, diffusion=self.u)
        self.s2 = topk_rows(self.u, cfg.diffusion_topk) if cfg.diffusion_topk > 0 else self.u
        if cfg.batch_size <= 0 or cfg.batch_size >= self.graph.n:
            self.local_table = local_anchors(self.u, min(cfg.m2, self.graph.n - 1))

    def _z_pre(self, state: ModelState) -> np.ndarray:
        if state.z_pre is None:
            state.z_pre = ae_encode(self.graph.x, state.ae).data
        return state.z_pre

    def _anchors(self, idx, epoch: int, step: int):
        cfg = self.cfg
        rng = np.random.default_rng([cfg.stream("sample"), epoch, 0, step])
        if idx is None:
            p = sampling_weights(self.degrees, cfg.beta, cfg.log_base or None)
            return global_anchors(p, cfg.m1, rng), self.local_table
        p = sampling_weights(self.degrees[idx], cfg.beta, cfg.log_base or None)
        u_b = self.u[np.ix_(idx, idx)]
        return global_anchors(p, cfg.m1, rng), local_anchors(u_b, min(cfg.m2, len(idx) - 1))

    def step_epoch(self, state: ModelState, params: dict) -> tuple[dict, np.ndarray, np.ndarray]:
        """One pass over the batches; returns loss sums, Q1 rows and Z-tilde rows."""
        epoch = state.epoch
        v1, v2 = self.views.views(epoch)
        n = self.graph.n
        q1 = np.empty((n, self.k))
        z_t = np.empty((n, self.cfg.ae_dims[-1]))
        sums: dict[str, float] = {}
        for step, idx in enumerate(self._batches(epoch)):
            batch = self.view_batch(idx)
            x1 = v1.x if idx is None else v1.x[idx]
            x2 = v2.x if idx is None else v2.x[idx]
            g_idx, l_idx = self._anchors(idx, epoch, step)
            try:
                out = main_forward(state, batch, self.cfg, x1, x2, g_idx, l_idx)
                grads = T.backward(out["loss"], params.values())
            except T.NumericError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from exc
            T.adam_step(params, {k: grads[t] for k, t in params.items()}, state.adam)
            rows = slice(None) if idx is None else idx
            q1[rows] = out["q1"].data
            z_t[rows] = out["z_t"].data
            for key in ("loss", "l_re", "l_rec", "l_clu", "l_ae", "l_gae", "l_pr"):
                sums[key] = sums.get(key, 0.0) + out[key].item()
        return sums, q1, z_t

    def train(self, state: ModelState, epochs: int | None = None,
              metrics_log: TextIO | None = None,
              callback: Callable[[MetricsReport], None] | None = None) -> list[MetricsReport]:
        cfg = self.cfg
        if self.views is None:
            self.prepare(self._z_pre(state))
        if state.mu is None:
            self.init_clusters(state, *self.joint_embeddings(state))
        if state.adam is None:
            state.adam = AdamState(lr=cfg.lr)
        params = state.named()
        epochs = cfg.epochs if epochs is None else epochs
        reports = []
        history: list[float] = []
        for _ in range(epochs):
            sums, q1, z_t = self.step_epoch(state, params)
            report = MetricsReport(epoch=state.epoch, losses=sums)
            if self.graph.labels is not None and cfg.eval_every > 0 \
                    and state.epoch % cfg.eval_every == 0:
                pred = predict(q1)
                m = compute_metrics(pred, self.graph.labels)
                report.acc, report.nmi, report.ari, report.f1 = m.acc, m.nmi, m.ari, m.f1
                try:
                    report.mad = mad(z_t)
                except ValueError:
                    pass
            reports.append(report)
            if metrics_log is not None:
                metrics_log.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")
            if callback is not None:
                callback(report)
            if np.any(np.bincount(predict(q1), minlength=self.k) == 0):
                log.warning("epoch %d: some clusters received no nodes", state.epoch)
            state.epoch += 1
            history.append(sums["loss"])
            if cfg.early_stop and _converged(history, cfg.early_stop_window, cfg.early_stop_tol):
                log.info("early stop at epoch %d", state.epoch)
                break
        return reports

    def infer(self, state: ModelState) -> tuple[np.ndarray, np.ndarray]:
        """Z-tilde and Q1 with unperturbed attributes over the augmented structures."""
        if self.views is None:
            self.prepare(self._z_pre(state))
        n = self.graph.n
        q1 = np.empty((n, self.k))
        z_t = np.empty((n, self.cfg.ae_dims[-1]))
        for step, idx in enumerate(self._batches(0, shuffle=False)):
            batch = self.view_batch(idx)
            g_idx, l_idx = self._anchors(idx, 0, step)
            out = main_forward(state, batch, self.cfg, batch.x, batch.x, g_idx, l_idx)
            rows = slice(None) if idx is None else idx
            q1[rows] = out["q1"].data
            z_t[rows] = out["z_t"].data
        return z_t, q1


def _converged(history: list[float], window: int, tol: float) -> bool:
    if len(history) <= window:
        return False
    before = min(history[:-window])
    recent = min(history[-window:])
    return (before - recent) < tol * max(abs(before), 1e-12)


def pretrain(graph: Graph, cfg: RunConfig) -> PretrainResult:
    return Trainer(graph, cfg).pretrain()


def train(graph: Graph, cfg: RunConfig, pretrained: PretrainResult | ModelState | None = None,
          metrics_log: TextIO | None = None) -> tuple[ModelState, list[MetricsReport], np.ndarray]:
    """Run the main phase (pretraining first when nothing is given).

    Returns the final state, per-epoch reports and the predicted labels.
    """
    trainer = Trainer(graph, cfg)
    if pretrained is None:
        pretrained = trainer.pretrain()
    if isinstance(pretrained, PretrainResult):
        state = pretrained.state
        trainer.prepare(pretrained.z_pre)
    else:
        state = pretrained
    reports = trainer.train(state, metrics_log=metrics_log)
    _, q1 = trainer.infer(state)
    return state, reports, predict(q1)
