"""Two stochastic views of a graph: attribute noise, edge deletion, diffusion."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import ConfigError, Graph, adjacency_from_edges, normalize_adjacency, ppr_diffusion


@dataclass
class AugmentConfig:
    perturb_scale: float = 0.1
    drop_ratio: float = 0.1
    eta: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.perturb_scale < 0:
            raise ConfigError(f"perturb_scale must be >= 0, got {self.perturb_scale}")
        if not 0.0 <= self.drop_ratio < 1.0:
            raise ConfigError(f"drop_ratio must lie in [0, 1), got {self.drop_ratio}")
        if not 0.0 < self.eta < 1.0:
            raise ConfigError(f"eta must lie in (0, 1), got {self.eta}")


@dataclass
class AugmentedView:
    x: np.ndarray
    s: sp.csr_matrix | np.ndarray


def perturb_attributes(x: np.ndarray, scale: float, rng) -> np.ndarray:
    """Multiply every entry by an independent Normal(1, scale^2) draw.

    ``rng`` is a Generator or a seed.
    """
    if scale < 0:
        raise ConfigError(f"perturbation scale must be >= 0, got {scale}")
    if scale == 0:
        return np.array(x, dtype=np.float64, copy=True)
    rng = np.random.default_rng(rng)
    return x * rng.normal(1.0, scale, size=x.shape)


def delete_edges(adj, z_pre: np.ndarray, ratio: float) -> sp.csr_matrix:
    """Drop the least similar edges of each node.

    Each node marks its floor(ratio * degree) incident edges of lowest cosine
    similarity between endpoint embeddings. Marked edges are removed lowest
    similarity first, at most floor(ratio * |E|) of them, and the result is
    rebuilt symmetric.
    """
    if not 0.0 <= ratio < 1.0:
        raise ConfigError(f"drop ratio must lie in [0, 1), got {ratio}")
    adj = sp.csr_matrix(adj)
    n = adj.shape[0]
    if ratio == 0.0:
        return adj.copy()
    z = np.asarray(z_pre, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1)
    zero = norms == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} zero embedding rows; their edges are drop candidates")
    unit = z / np.where(zero, 1.0, norms)[:, None]

    coo = sp.triu(adj, k=1).tocoo()
    u, v = coo.row, coo.col
    sim = np.einsum("ij,ij->i", unit[u], unit[v])
    sim[zero[u] | zero[v]] = -1.0

    # one entry per (node, incident edge)
    owner = np.concatenate([u, v])
    edge_id = np.concatenate([np.arange(len(u)), np.arange(len(u))])
    score = np.concatenate([sim, sim])
    order = np.lexsort((edge_id, score, owner))
    owner, edge_id = owner[order], edge_id[order]
    deg = np.bincount(owner, minlength=n)
    start = np.concatenate([[0], np.cumsum(deg)[:-1]])
    rank = np.arange(len(owner)) - start[owner]
    marked = rank < np.floor(ratio * deg[owner])
    candidates = np.unique(edge_id[marked])
    budget = int(np.floor(ratio * len(u)))
    if len(candidates) > budget:
        candidates = candidates[np.lexsort((candidates, sim[candidates]))[:budget]]
    keep = np.ones(len(u), dtype=bool)
    keep[candidates] = False
    return adjacency_from_edges(n, np.column_stack([u[keep], v[keep]]))


class ViewMaker:
    """Builds the two views each epoch from one seeded stream.

    View 1 is perturbed attributes over the edge-deleted graph, view 2 is
    independently perturbed attributes over the diffusion matrix.
    """

    def __init__(self, graph: Graph, z_pre: np.ndarray, cfg: AugmentConfig,
                 diffusion: np.ndarray | None = None):
        self.graph = graph
        self.cfg = cfg
        self.s1 = normalize_adjacency(delete_edges(graph.adj, z_pre, cfg.drop_ratio))
        self.diffusion = ppr_diffusion(graph.s, cfg.eta) if diffusion is None else diffusion

    def views(self, epoch: int) -> tuple[AugmentedView, AugmentedView]:
        rng = np.random.default_rng([self.cfg.seed, epoch])
        x = self.graph.x
        x1 = perturb_attributes(x, self.cfg.perturb_scale, rng)
        x2 = perturb_attributes(x, self.cfg.perturb_scale, rng)
        return AugmentedView(x1, self.s1), AugmentedView(x2, self.diffusion)


def make_views(graph: Graph, z_pre: np.ndarray, cfg: AugmentConfig,
               epoch: int = 0) -> tuple[AugmentedView, AugmentedView]:
    return ViewMaker(graph, z_pre, cfg).views(epoch)
