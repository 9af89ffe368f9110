"""Attribute autoencoder, GCN autoencoder and their reconstruction losses."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class AEParams:
    enc_w: list[Tensor]
    enc_b: list[Tensor]
    dec_w: list[Tensor]
    dec_b: list[Tensor]
    hidden_act: str = "relu"

    @classmethod
    def init(cls, d: int, dims=(128, 256, 512, 20), rng=None, hidden_act: str = "relu"):
        rng = np.random.default_rng(0) if rng is None else rng
        enc_chain = [d, *dims]
        dec_chain = [dims[-1], *reversed(dims[:-1]), d]

        def layers(chain):
            ws = [T.parameter(glorot(rng, a, b)) for a, b in zip(chain[:-1], chain[1:])]
            bs = [T.parameter(np.zeros((1, b))) for b in chain[1:]]
            return ws, bs

        enc_w, enc_b = layers(enc_chain)
        dec_w, dec_b = layers(dec_chain)
        return cls(enc_w, enc_b, dec_w, dec_b, hidden_act)

    def named(self) -> dict[str, Tensor]:
        out = {}
        for part in ("enc_w", "enc_b", "dec_w", "dec_b"):
            for i, t in enumerate(getattr(self, part)):
                out[f"ae.{part}.{i}"] = t
        return out


@dataclass
class GAEParams:
    enc_w: list[Tensor]
    dec_w: list[Tensor]
    hidden_act: str = "tanh"
    final_act: str = "linear"

    @classmethod
    def init(cls, d: int, dims=(128, 256, 20), rng=None, hidden_act: str = "tanh",
             final_act: str = "linear"):
        rng = np.random.default_rng(0) if rng is None else rng
        enc_chain = [d, *dims]
        dec_chain = [dims[-1], *reversed(dims[:-1]), d]
        enc_w = [T.parameter(glorot(rng, a, b)) for a, b in zip(enc_chain[:-1], enc_chain[1:])]
        dec_w = [T.parameter(glorot(rng, a, b)) for a, b in zip(dec_chain[:-1], dec_chain[1:])]
        return cls(enc_w, dec_w, hidden_act, final_act)

    def named(self) -> dict[str, Tensor]:
        out = {f"gae.enc_w.{i}": t for i, t in enumerate(self.enc_w)}
        out.update({f"gae.dec_w.{i}": t for i, t in enumerate(self.dec_w)})
        return out


@dataclass
class LayerTrace:
    layers: list[Tensor] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.layers)

    def __add__(self, other: LayerTrace) -> LayerTrace:
        return LayerTrace(self.layers + other.layers)


def _mlp(x: Tensor, ws, bs, hidden_act: str) -> Tensor:
    act = T.ACTIVATIONS[hidden_act]
    h = T.as_tensor(x)
    last = len(ws) - 1
    for i, (w, b) in enumerate(zip(ws, bs)):
        h = T.add_bias(T.matmul(h, w), b)
        if i < last:
            h = act(h)
    return h


def ae_encode(x, p: AEParams) -> Tensor:
    return _mlp(x, p.enc_w, p.enc_b, p.hidden_act)


def ae_decode(z, p: AEParams) -> Tensor:
    return _mlp(z, p.dec_w, p.dec_b, p.hidden_act)


def _gcn_stack(x, s, ws, hidden_act: str, final_act: str) -> tuple[Tensor, LayerTrace]:
    h = T.as_tensor(x)
    if s.shape[0] != s.shape[1] or s.shape[1] != h.shape[0]:
        raise T.ShapeError(f"propagation matrix {s.shape} does not fit {h.shape[0]} nodes")
    trace = LayerTrace()
    last = len(ws) - 1
    for i, w in enumerate(ws):
        act = T.ACTIVATIONS[final_act if i == last else hidden_act]
        h = act(T.spmm(s, T.matmul(h, w)))
        trace.layers.append(h)
    return h, trace


def gae_encode(x, s, p: GAEParams) -> tuple[Tensor, LayerTrace]:
    return _gcn_stack(x, s, p.enc_w, p.hidden_act, p.final_act)


def gae_decode(z, s, p: GAEParams) -> tuple[Tensor, LayerTrace]:
    return _gcn_stack(z, s, p.dec_w, p.hidden_act, p.final_act)


def frobenius_sq(a) -> Tensor:
    return T.sum_all(T.square(a))


def loss_ae(x, x_hat) -> Tensor:
    """(1/n) ||X - X_hat||_F^2."""
    x, x_hat = T.as_tensor(x), T.as_tensor(x_hat)
    return T.mul(frobenius_sq(T.sub(x, x_hat)), 1.0 / x.shape[0])


def loss_gae(s, s_hat, sx, x_hat, alpha: float = 0.1) -> Tensor:
    """(alpha/n) ||S - S_hat||_F^2 + (1/n) ||SX - X_hat||_F^2."""
    s_hat, x_hat = T.as_tensor(s_hat), T.as_tensor(x_hat)
    s_dense = s.toarray() if hasattr(s, "toarray") else np.asarray(s)
    n = s_hat.shape[0]
    adj_term = frobenius_sq(T.sub(s_hat, s_dense))
    attr_term = frobenius_sq(T.sub(x_hat, np.asarray(sx)))
    return T.mul(T.add(T.mul(adj_term, alpha), attr_term), 1.0 / n)


def row_kl(p_logits: Tensor, q_logits: Tensor) -> Tensor:
    """Mean over rows of KL(softmax(p) || softmax(q))."""
    log_p = T.log_softmax_rows(p_logits)
    log_q = T.log_softmax_rows(q_logits)
    p = T.exp(log_p)
    kl = T.sum_all(T.mul(p, T.sub(log_p, log_q)))
    return T.mul(kl, 1.0 / p_logits.shape[0])


def propagation_reg(trace: LayerTrace, s) -> Tensor:
    """Sum over traced layers H of the row-softmax KL between H and SH."""
    total = T.Tensor(0.0)
    for h in trace.layers:
        total = T.add(total, row_kl(h, T.spmm(s, h)))
    return total


def reconstruction_loss(l_ae, l_gae, l_pr, eps: float = 5e3):
    return l_ae + l_gae + eps * l_pr
