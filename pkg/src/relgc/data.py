"""Dataset directories and the stochastic-block-model generator.

A dataset directory holds

* ``attributes.tsv``: n rows of d tab-separated reals,
* ``edges.tsv``: optional, one ``u<TAB>v`` pair per line (0-based, each
  undirected edge listed once),
* ``labels.tsv``: optional, one integer per line,
* ``manifest.json``: optional, e.g. ``{"name": "acm", "n_clusters": 3}`` or
  ``{"knn": 5}`` for record data without an edge file.
"""
from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import Graph, adjacency_from_edges, knn_graph


class DatasetError(ValueError):
    pass


def _read_rows(path: Path, kind=float, width: int | None = None) -> list[list]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            try:
                row = [kind(p) for p in parts]
            except ValueError:
                raise DatasetError(f"{path.name} line {lineno}: cannot parse {line[:60]!r}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetError(
                    f"{path.name} line {lineno}: expected {width} columns, found {len(row)}")
            rows.append(row)
    return rows


def read_manifest(path: str | Path) -> dict:
    f = Path(path) / "manifest.json"
    return json.loads(f.read_text()) if f.exists() else {}


def load_dataset(path: str | Path, knn_k: int | None = None) -> Graph:
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    attr_file = root / "attributes.tsv"
    if not attr_file.exists():
        raise FileNotFoundError(f"missing {attr_file}")
    x = np.asarray(_read_rows(attr_file), dtype=np.float64)
    n = x.shape[0]
    manifest = read_manifest(root)

    edge_file = root / "edges.tsv"
    if edge_file.exists():
        edges = np.asarray(_read_rows(edge_file, int, 2), dtype=np.int64).reshape(-1, 2)
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise DatasetError(f"edges.tsv references a node outside [0, {n})")
        pairs = {(int(u), int(v)) for u, v in edges if u != v}
        mirrored = sum((v, u) in pairs for u, v in pairs)
        if 0 < mirrored < len(pairs):
            warnings.warn("edges.tsv mixes one-way and two-way listings; symmetrized")
        adj = adjacency_from_edges(n, edges)
    elif "knn" in manifest or knn_k:
        k = int(manifest.get("knn", knn_k))
        adj = knn_graph(x, k)
    else:
        raise DatasetError(f"{root} has neither edges.tsv nor a knn entry in manifest.json")

    labels = None
    label_file = root / "labels.tsv"
    if label_file.exists():
        labels = np.asarray(_read_rows(label_file, int, 1), dtype=np.int64).ravel()
        if len(labels) != n:
            raise DatasetError(f"labels.tsv has {len(labels)} rows, attributes.tsv has {n}")
    return Graph(adj, x, labels)


def save_dataset(path: str | Path, graph: Graph, manifest: dict | None = None) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    np.savetxt(root / "attributes.tsv", graph.x, delimiter="\t", fmt="%.17g")
    upper = sp.triu(graph.adj, k=1).tocoo()
    np.savetxt(root / "edges.tsv", np.column_stack([upper.row, upper.col]),
               delimiter="\t", fmt="%d")
    if graph.labels is not None:
        np.savetxt(root / "labels.tsv", graph.labels, fmt="%d")
    if manifest is not None:
        (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return root


def generate_sbm(n: int = 150, k: int = 3, p_in: float = 0.2, p_out: float = 0.01,
                 d: int = 50, mean_scale: float = 0.3, noise: float = 1.0,
                 seed: int = 0) -> Graph:
    """Planted-partition graph with Gaussian block-mean attributes.

    Nodes are split into ``k`` near-equal blocks; each block draws a mean vector
    from Normal(0, mean_scale^2) and its nodes add Normal(0, noise^2) noise.
    The default scale leaves the attributes alone clearly short of a perfect
    k-means partition, so the graph has to contribute.
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % k
    rng.shuffle(labels)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    draws = rng.uniform(size=(n, n)) < prob
    iu = np.triu_indices(n, k=1)
    mask = draws[iu]
    adj = adjacency_from_edges(n, np.column_stack([iu[0][mask], iu[1][mask]]))
    means = rng.normal(0.0, mean_scale, size=(k, d))
    x = means[labels] + rng.normal(0.0, noise, size=(n, d))
    return Graph(adj, x, labels)


def generate_sparse_sbm(n: int, k: int = 3, deg_in: float = 8.0, deg_out: float = 1.0,
                        d: int = 50, mean_scale: float = 0.3, seed: int = 0) -> Graph:
    """SBM with fixed expected degrees, built in O(edges) for scaling runs."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % k
    rng.shuffle(labels)
    blocks = [np.flatnonzero(labels == c) for c in range(k)]
    m_in = rng.poisson(deg_in * n / 2)
    m_out = rng.poisson(deg_out * n / 2)
    src = rng.integers(n, size=m_in)
    dst = np.array([rng.choice(blocks[labels[s]]) for s in src], dtype=np.int64)
    u = rng.integers(n, size=m_out)
    v = rng.integers(n, size=m_out)
    edges = np.concatenate([np.column_stack([src, dst]), np.column_stack([u, v])])
    adj = adjacency_from_edges(n, edges)
    means = rng.normal(0.0, mean_scale, size=(k, d))
    x = means[labels] + rng.normal(size=(n, d))
    return Graph(adj, x, labels)
