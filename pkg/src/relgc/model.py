"""Trainable state and the forward passes of each training phase."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tensor as T
from .cluster import (FusionParams, clustering_loss, fuse_views, reconstruct_adjacency,
                      refine_fusion, soft_assign, target_distribution, total_loss)
from .config import RunConfig
from .nets import (AEParams, GAEParams, ae_decode, ae_encode, gae_decode, gae_encode,
                   loss_ae, loss_gae, propagation_reg, reconstruction_loss)
from .relation import relation_loss
from .tensor import AdamState, Tensor


@dataclass
class ModelState:
    ae: AEParams
    gae: GAEParams
    fusion: FusionParams
    mu: Tensor | None = None
    mu_ae: Tensor | None = None
    mu_gae: Tensor | None = None
    adam: AdamState | None = None
    epoch: int = 0
    z_pre: np.ndarray | None = None  # AE embedding used for edge deletion

    @classmethod
    def init(cls, n: int, d: int, cfg: RunConfig) -> ModelState:
        rng = np.random.default_rng(cfg.stream("model"))
        ae = AEParams.init(d, cfg.ae_dims, rng, cfg.ae_act)
        gae = GAEParams.init(d, cfg.gae_dims, rng, cfg.gae_act, cfg.gae_final_act)
        fusion = FusionParams.init(n, cfg.ae_dims[-1])
        return cls(ae, gae, fusion)

    def named(self, groups=("ae", "gae", "fusion", "mu")) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        if "ae" in groups:
            out.update(self.ae.named())
        if "gae" in groups:
            out.update(self.gae.named())
        if "fusion" in groups:
            out.update(self.fusion.named())
        if "mu" in groups:
            for name in ("mu", "mu_ae", "mu_gae"):
                t = getattr(self, name)
                if t is not None:
                    out[name] = t
        return out


@dataclass
class Batch:
    """Clean inputs restricted to a node subset (``idx`` None means all nodes)."""

    idx: np.ndarray | None
    x: np.ndarray
    s: sp.csr_matrix
    s_dense: np.ndarray
    sx: np.ndarray
    s1: sp.csr_matrix
    s2: sp.csr_matrix | np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]


def sub_block(m, idx):
    if idx is None:
        return m
    if sp.issparse(m):
        return m[idx][:, idx].tocsr()
    return m[np.ix_(idx, idx)]


def _rows(t: Tensor, idx) -> Tensor:
    return t if idx is None else T.take_rows(t, idx)


def fused_representation(state: ModelState, batch: Batch, z_a1, z_a2, z_g1, z_g2) -> Tensor:
    w1 = _rows(state.fusion.w1, batch.idx)
    w2 = _rows(state.fusion.w2, batch.idx)
    z_c = fuse_views(z_a1, z_a2, z_g1, z_g2, w1, w2)
    return refine_fusion(z_c, batch.s, state.fusion.delta)


def pretrain_ae_loss(state: ModelState, batch: Batch) -> Tensor:
    return loss_ae(batch.x, ae_decode(ae_encode(batch.x, state.ae), state.ae))


def pretrain_gae_loss(state: ModelState, batch: Batch, cfg: RunConfig) -> Tensor:
    z, _ = gae_encode(batch.x, batch.s, state.gae)
    x_hat, _ = gae_decode(z, batch.s, state.gae)
    s_hat = reconstruct_adjacency(z, z, x_hat)
    return loss_gae(batch.s_dense, s_hat, batch.sx, x_hat, cfg.alpha)


def joint_forward(state: ModelState, batch: Batch, cfg: RunConfig) -> dict:
    """AE and GAE on the clean graph, joined through the fusion layer."""
    z_a = ae_encode(batch.x, state.ae)
    z_g, _ = gae_encode(batch.x, batch.s, state.gae)
    z_t = fused_representation(state, batch, z_a, z_a, z_g, z_g)
    x_hat_ae = ae_decode(z_t, state.ae)
    x_hat_g, _ = gae_decode(z_t, batch.s, state.gae)
    s_hat = reconstruct_adjacency(z_g, z_g, x_hat_g)
    l_ae = loss_ae(batch.x, x_hat_ae)
    l_gae = loss_gae(batch.s_dense, s_hat, batch.sx, x_hat_g, cfg.alpha)
    return {"loss": T.add(l_ae, l_gae), "l_ae": l_ae, "l_gae": l_gae,
            "z_t": z_t, "z_ae": z_a, "z_gae": z_g}


def main_forward(state: ModelState, batch: Batch, cfg: RunConfig, x1, x2,
                 global_idx, local_idx) -> dict:
    """Every loss term of one training step on two augmented views."""
    ae, gae = state.ae, state.gae
    z_a1, z_a2 = ae_encode(x1, ae), ae_encode(x2, ae)
    z_g1, trace1 = gae_encode(x1, batch.s1, gae)
    z_g2, trace2 = gae_encode(x2, batch.s2, gae)

    l_re = relation_loss(z_a1, z_a2, z_g1, z_g2, global_idx, local_idx,
                         cfg.symmetric_relation)

    z_t = fused_representation(state, batch, z_a1, z_a2, z_g1, z_g2)
    x_hat_ae = ae_decode(z_t, ae)
    x_hat_g, trace_dec = gae_decode(z_t, batch.s, gae)
    s_hat = reconstruct_adjacency(z_g1, z_g2, x_hat_g)

    l_ae = loss_ae(batch.x, x_hat_ae)
    l_gae = loss_gae(batch.s_dense, s_hat, batch.sx, x_hat_g, cfg.alpha)
    # encoder layers regularized against their own view's propagation matrix
    l_pr = T.add(T.mul(T.add(propagation_reg(trace1, batch.s1),
                             propagation_reg(trace2, batch.s2)), 0.5),
                 propagation_reg(trace_dec, batch.s))
    l_rec = reconstruction_loss(l_ae, l_gae, l_pr, cfg.eps)

    mu = state.mu
    mu_ae = mu if state.mu_ae is None else state.mu_ae
    mu_gae = mu if state.mu_gae is None else state.mu_gae
    q1 = soft_assign(z_t, mu)
    q2 = soft_assign(T.mul(T.add(z_a1, z_a2), 0.5), mu_ae)
    q3 = soft_assign(T.mul(T.add(z_g1, z_g2), 0.5), mu_gae)
    p = target_distribution(q1)
    l_clu = clustering_loss(p, q1, q2, q3)
    loss = total_loss(l_re, l_rec, l_clu, cfg.kappa)
    return {"loss": loss, "l_re": l_re, "l_rec": l_rec, "l_clu": l_clu,
            "l_ae": l_ae, "l_gae": l_gae, "l_pr": l_pr, "q1": q1, "z_t": z_t}
