"""Representation fusion, self-training clustering distributions and k-means."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .graph import ConfigError
from .tensor import Tensor


@dataclass
class FusionParams:
    w1: Tensor
    w2: Tensor
    delta: Tensor

    @classmethod
    def init(cls, n: int, dim: int, weight: float = 0.5, delta: float = 0.5):
        return cls(T.parameter(np.full((n, dim), weight)),
                   T.parameter(np.full((n, dim), weight)),
                   T.parameter([[delta]]))

    def named(self) -> dict[str, Tensor]:
        return {"fusion.w1": self.w1, "fusion.w2": self.w2, "fusion.delta": self.delta}


def fuse_views(z_ae1, z_ae2, z_gae1, z_gae2, w1, w2) -> Tensor:
    """W1 * (Z_AE^1 + Z_AE^2) + W2 * (Z_GAE^1 + Z_GAE^2), elementwise weights."""
    return T.add(T.mul(w1, T.add(z_ae1, z_ae2)), T.mul(w2, T.add(z_gae1, z_gae2)))


def refine_fusion(z_c, s, delta) -> Tensor:
    """delta * S Zc + softmax(S Zc Zc^T S^T) S Zc."""
    sz = T.spmm(s, z_c)
    attn = T.softmax_rows(T.matmul(sz, T.transpose(sz)))
    return T.add(T.mul(sz, delta), T.matmul(attn, sz))


def reconstruct_adjacency(z_gae1, z_gae2, x_hat) -> Tensor:
    """(Z1 Z1^T + Z2 Z2^T) / 2 + X_hat X_hat^T."""
    gram = lambda z: T.matmul(z, T.transpose(z))  # noqa: E731
    return T.add(T.mul(T.add(gram(z_gae1), gram(z_gae2)), 0.5), gram(x_hat))


def soft_assign(z, mu) -> Tensor:
    """Student-t (one degree of freedom) assignment of rows of z to centroids."""
    kernel = T.reciprocal(T.add(T.pairwise_sqdist(z, mu), 1.0))
    return T.row_normalize_sum(kernel)


def target_distribution(q) -> np.ndarray:
    """Sharpened target p_ij proportional to q_ij^2 / f_j with f_j = sum_i q_ij.

    Returned as a plain array: it is held fixed during differentiation.
    """
    q = q.data if isinstance(q, Tensor) else np.asarray(q, dtype=np.float64)
    f = q.sum(axis=0)
    if np.any(f <= 0):
        raise FloatingPointError("a cluster received zero total assignment mass")
    w = q * q / f
    return w / w.sum(axis=1, keepdims=True)


def clustering_loss(p, q1, q2, q3) -> Tensor:
    """KL(P || (Q1 + Q2 + Q3) / 3), summed over all entries."""
    p = np.asarray(p.data if isinstance(p, Tensor) else p, dtype=np.float64)
    mean_q = T.mul(T.add(T.add(q1, q2), q3), 1.0 / 3.0)
    with np.errstate(divide="ignore"):
        plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0).sum()
    cross = T.sum_all(T.mul(T.log(mean_q), p))
    return T.sub(T.Tensor(plogp), cross)


def predict(q) -> np.ndarray:
    """Row argmax; ties go to the lowest cluster index."""
    q = q.data if isinstance(q, Tensor) else np.asarray(q)
    return np.argmax(q, axis=1)


def total_loss(l_re, l_rec, l_clu, kappa: float = 10.0):
    return l_re + l_rec + kappa * l_clu


# ------------------------------------------------------------------ k-means

def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = np.sum(x * x, axis=1)[:, None] - 2.0 * x @ c.T + np.sum(c * c, axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dists(x, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            i = rng.integers(n)
        else:
            i = int(np.searchsorted(np.cumsum(closest), rng.uniform() * total, side="right"))
            i = min(i, n - 1)
        centers[j] = x[i]
        closest = np.minimum(closest, _sq_dists(x, centers[j:j + 1])[:, 0])
    return centers


def lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int = 300,
          tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray, float]:
    centers = centers.copy()
    k = centers.shape[0]
    prev = np.inf
    for _ in range(max_iter):
        d = _sq_dists(x, centers)
        labels = np.argmin(d, axis=1)
        inertia = float(d[np.arange(len(x)), labels].sum())
        if prev - inertia <= tol * max(prev, 1e-300) and np.isfinite(prev):
            break
        prev = inertia
        counts = np.bincount(labels, minlength=k)
        for j in range(k):
            if counts[j] > 0:
                centers[j] = x[labels == j].mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its center
                far = int(np.argmax(d[np.arange(len(x)), labels]))
                centers[j] = x[far]
                d[far, :] = 0.0
    d = _sq_dists(x, centers)
    labels = np.argmin(d, axis=1)
    return centers, labels, float(d[np.arange(len(x)), labels].sum())


def init_centroids(z, k: int, seed: int = 0, n_init: int = 20,
                   max_iter: int = 300, tol: float = 1e-6) -> np.ndarray:
    """k-means++ seeding plus Lloyd iterations; best of ``n_init`` restarts."""
    x = np.asarray(z.data if isinstance(z, Tensor) else z, dtype=np.float64)
    if k > x.shape[0]:
        raise ConfigError(f"cannot form {k} clusters from {x.shape[0]} points")
    rng = np.random.default_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(n_init):
        centers, _, inertia = lloyd(x, kmeans_pp(x, k, rng), max_iter, tol)
        if inertia < best_inertia:
            best, best_inertia = centers, inertia
    return best
