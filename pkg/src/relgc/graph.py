"""Graph container, adjacency normalization, PPR diffusion and kNN graphs."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.spatial.distance import cdist


class ConfigError(ValueError):
    pass


@dataclass
class Graph:
    """Undirected graph with dense node attributes.

    ``adj`` is a symmetric 0/1 CSR matrix without self-loops.
    """

    adj: sp.csr_matrix
    x: np.ndarray
    labels: np.ndarray | None = None
    _norm: sp.csr_matrix | None = field(default=None, repr=False)

    def __post_init__(self):
        self.adj = sp.csr_matrix(self.adj, dtype=np.float64)
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2 or self.x.shape[0] != self.adj.shape[0]:
            raise ValueError(f"attributes {self.x.shape} do not match adjacency {self.adj.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def num_edges(self) -> int:
        return int(self.adj.nnz // 2)

    @property
    def s(self) -> sp.csr_matrix:
        """Normalized adjacency, computed on first use."""
        if self._norm is None:
            self._norm = normalize_adjacency(self.adj)
        return self._norm

    def degrees(self) -> np.ndarray:
        """Degrees including the added self-loop."""
        return np.asarray(self.adj.sum(axis=1)).ravel() + 1.0


def adjacency_from_edges(n: int, edges) -> sp.csr_matrix:
    """Symmetric 0/1 adjacency from an edge list; self-loops and duplicates dropped."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edges = edges[edges[:, 0] != edges[:, 1]]
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        raise ValueError(f"edge endpoint outside [0, {n})")
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    a = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    a.data[:] = 1.0
    a.sort_indices()
    return a


def normalize_adjacency(adj) -> sp.csr_matrix:
    """D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I."""
    a = sp.csr_matrix(adj, dtype=np.float64)
    n = a.shape[0]
    a_tilde = (a + sp.identity(n, format="csr")).tocsr()
    deg = np.asarray(a_tilde.sum(axis=1)).ravel()
    inv_sqrt = sp.diags(1.0 / np.sqrt(deg))
    s = (inv_sqrt @ a_tilde @ inv_sqrt).tocsr()
    s.sort_indices()
    return s


def ppr_diffusion(s, eta: float) -> np.ndarray:
    """Personalized-PageRank diffusion eta * (I - (1 - eta) S)^-1 via dense LU."""
    if not 0.0 < eta < 1.0:
        raise ConfigError(f"teleport probability must lie in (0, 1), got {eta}")
    dense = s.toarray() if sp.issparse(s) else np.asarray(s, dtype=np.float64)
    n = dense.shape[0]
    system = np.eye(n) - (1.0 - eta) * dense
    lu = sla.lu_factor(system)
    return sla.lu_solve(lu, eta * np.eye(n))


def ppr_series(s, eta: float, terms: int) -> np.ndarray:
    """Truncated series eta * sum_{j<=terms} ((1 - eta) S)^j.

    Differs from :func:`ppr_diffusion` by at most (1-eta)^(terms+1)/eta in
    operator norm; useful when a dense factorization does not fit.
    """
    if not 0.0 < eta < 1.0:
        raise ConfigError(f"teleport probability must lie in (0, 1), got {eta}")
    n = s.shape[0]
    power = np.eye(n)
    total = np.eye(n)
    for _ in range(terms):
        power = (1.0 - eta) * np.asarray(s @ power)
        total += power
    return eta * total


def knn_graph(x: np.ndarray, k: int = 5) -> sp.csr_matrix:
    """Undirected kNN graph under Euclidean distance, symmetrized by union.

    Ties go to the lower node index.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k >= n:
        warnings.warn(f"k={k} >= n={n}; clamping to {n - 1}")
        k = n - 1
    if k == 0:
        return sp.csr_matrix((n, n))
    nbrs = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, 1024):
        stop = min(start + 1024, n)
        dist = cdist(x[start:stop], x, "sqeuclidean")
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort keeps lower indices first among equal distances
        nbrs[start:stop] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    return adjacency_from_edges(n, np.column_stack([rows, nbrs.ravel()]))
