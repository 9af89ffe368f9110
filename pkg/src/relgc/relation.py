"""Anchor extraction and the redundancy-free relation loss.

Relation vectors hold dot products between a node's embedding and the
embeddings of its anchors. The loss rewards agreement of a node's relation
vectors across the two views and penalizes agreement between different nodes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .graph import ConfigError
from .tensor import Tensor


@dataclass
class SamplingWeights:
    w: np.ndarray
    p: np.ndarray
    beta: float


def sampling_weights(degrees, beta: float = 0.8, log_base: float | None = None) -> SamplingWeights:
    """w_i = beta ** log(deg_i + 1), normalized to a distribution.

    ``log_base`` None means the natural logarithm.
    """
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}")
    deg = np.asarray(degrees, dtype=np.float64)
    logs = np.log(deg + 1.0)
    if log_base is not None:
        logs = logs / np.log(log_base)
    w = beta ** logs
    return SamplingWeights(w, w / w.sum(), beta)


def qmc_points(m: int, omega: float) -> np.ndarray:
    """Randomly shifted centred lattice {(2i - 1) / (2m) + omega mod 1}."""
    if m < 1:
        raise ConfigError(f"need at least one point, got {m}")
    i = np.arange(1, m + 1)
    return np.mod((2 * i - 1) / (2 * m) + omega, 1.0)


def qmc_multinomial(p, points) -> np.ndarray:
    """Inverse-CDF map: each point t goes to the first index whose cumulative mass exceeds t."""
    p = p.p if isinstance(p, SamplingWeights) else np.asarray(p, dtype=np.float64)
    cdf = np.cumsum(p)
    cdf[-1] = max(cdf[-1], 1.0)
    idx = np.searchsorted(cdf, np.asarray(points), side="right")
    return np.minimum(idx, len(p) - 1)


def global_anchors(p, m: int, rng: np.random.Generator) -> np.ndarray:
    return qmc_multinomial(p, qmc_points(m, rng.uniform()))


def local_anchors(u: np.ndarray, m: int) -> np.ndarray:
    """Top-m off-diagonal entries of each row of the diffusion matrix.

    Ties go to the lower index. Returns an n x m integer table.
    """
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[0]
    if m > n - 1:
        raise ConfigError(f"cannot pick {m} local anchors among {n - 1} other nodes")
    scores = u.copy()
    np.fill_diagonal(scores, -np.inf)
    return np.argsort(-scores, axis=1, kind="stable")[:, :m]


def global_relations(z_query, z_anchor, anchors) -> Tensor:
    """n x M1 relation matrix against one anchor list shared by every node."""
    anchors = np.asarray(anchors)
    if anchors.size == 0:
        raise ValueError("empty anchor set")
    return T.matmul(z_query, T.transpose(T.take_rows(z_anchor, anchors)))


def local_relations(z_query, z_anchor, table) -> Tensor:
    """n x M2 relation matrix against a per-node anchor table."""
    table = np.asarray(table)
    if table.size == 0:
        raise ValueError("empty anchor set")
    return T.gather_dot(z_query, z_anchor, table)


def relation_vectors(z_query, z_anchor, anchors) -> Tensor:
    """Dispatch on anchor layout: 1-D shared list or 2-D per-node table."""
    anchors = np.asarray(anchors)
    if anchors.ndim == 1:
        return global_relations(z_query, z_anchor, anchors)
    return local_relations(z_query, z_anchor, anchors)


def _unit_rows(r: Tensor) -> Tensor:
    norms = np.linalg.norm(r.data, axis=1)
    if np.any(norms == 0):
        warnings.warn(f"{int(np.sum(norms == 0))} zero relation rows contribute nothing")
    return T.normalize_rows(r)


def preservation_term(r1, r2) -> Tensor:
    """Mean squared cosine between matching rows of the two relation matrices."""
    u1, u2 = _unit_rows(T.as_tensor(r1)), _unit_rows(T.as_tensor(r2))
    cos = T.row_sum(T.mul(u1, u2))
    return T.mul(T.sum_all(T.square(cos)), 1.0 / u1.shape[0])


def redundancy_term(r1, r2) -> Tensor:
    """Mean squared cosine over ordered pairs of distinct rows (i from view 1, j from view 2)."""
    u1, u2 = _unit_rows(T.as_tensor(r1)), _unit_rows(T.as_tensor(r2))
    n = u1.shape[0]
    if n < 2:
        raise ValueError("redundancy needs at least two nodes")
    cos_sq = T.square(T.matmul(u1, T.transpose(u2)))
    off = T.sub(T.sum_all(cos_sq), T.sum_all(T.diag_part(cos_sq)))
    return T.mul(off, 1.0 / (n * (n - 1)))


def relation_level_loss(z1, z2, global_idx, local_idx, symmetric: bool = False) -> Tensor:
    """C^g + C^l - R^g - R^l for one encoder.

    Anchor embeddings always come from view 2; the second relation matrix
    uses view-2 queries, or view-1 anchors when ``symmetric`` is set.
    """
    second_anchor = z1 if symmetric else z2
    total = T.Tensor(0.0)
    for anchors in (global_idx, local_idx):
        r1 = relation_vectors(z1, z2, anchors)
        r2 = relation_vectors(z2, second_anchor, anchors)
        total = T.add(total, T.sub(redundancy_term(r1, r2), preservation_term(r1, r2)))
    return total


def relation_loss(z_ae1, z_ae2, z_gae1, z_gae2, global_idx, local_idx,
                  symmetric: bool = False) -> Tensor:
    """Attribute-level plus structure-level relation loss, in [-4, 4]."""
    l_rea = relation_level_loss(z_ae1, z_ae2, global_idx, local_idx, symmetric)
    l_reg = relation_level_loss(z_gae1, z_gae2, global_idx, local_idx, symmetric)
    return T.add(l_rea, l_reg)
