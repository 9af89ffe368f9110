"""External clustering metrics and the MAD smoothness measure."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class MetricsReport:
    acc: float = float("nan")
    nmi: float = float("nan")
    ari: float = float("nan")
    f1: float = float("nan")
    mad: float = float("nan")
    epoch: int = -1
    losses: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def contingency(pred, truth) -> np.ndarray:
    """Counts table with rows = predicted clusters, columns = true classes."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"label vectors differ in length: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty label vectors")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def accuracy(pred, truth) -> float:
    table = contingency(pred, truth)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum() / table.sum())


def macro_f1(pred, truth) -> float:
    """Class-averaged F1 under the accuracy-optimal cluster-to-class map.

    When several maps reach the best accuracy the one with the highest F1 is
    used, which keeps the score independent of the solver's tie breaking.
    A matched pair contributes 2 tp / (cluster size + class size); unmatched
    classes score zero.
    """
    table = contingency(pred, truth)
    sizes = table.sum(axis=1)[:, None] + table.sum(axis=0)[None, :]
    f1 = 2.0 * table / sizes
    best_tp = table[linear_sum_assignment(-table)].sum()
    # each F1 sum is below min(r, c), so the bonus never outweighs one count
    weight = 1.0 / (2.0 * (min(table.shape) + 1))
    rows, cols = linear_sum_assignment(-(table + weight * f1))
    if table[rows, cols].sum() != best_tp:  # pragma: no cover - guards float ties
        rows, cols = linear_sum_assignment(-table)
    return float(f1[rows, cols].sum() / table.shape[1])


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information over the arithmetic mean of the two entropies."""
    table = contingency(pred, truth).astype(np.float64)
    n = table.sum()
    h_pred = _entropy(table.sum(axis=1))
    h_true = _entropy(table.sum(axis=0))
    if h_pred == 0 and h_true == 0:
        return 1.0
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))
    nz = table > 0
    mi = float((table[nz] / n * np.log(table[nz] * n / outer[nz])).sum())
    denom = 0.5 * (h_pred + h_true)
    return float(max(mi, 0.0) / denom) if denom > 0 else 0.0


def _pairs(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2


def ari(pred, truth) -> float:
    table = contingency(pred, truth)
    n = table.sum()
    sum_ij = _pairs(table).sum()
    sum_a = _pairs(table.sum(axis=1)).sum()
    sum_b = _pairs(table.sum(axis=0)).sum()
    total = _pairs(n)
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def compute_metrics(pred, truth) -> MetricsReport:
    return MetricsReport(acc=accuracy(pred, truth), nmi=nmi(pred, truth),
                         ari=ari(pred, truth), f1=macro_f1(pred, truth))


def mad(z) -> float:
    """Mean over nodes of the mean cosine distance to every other node."""
    z = np.asarray(getattr(z, "data", z), dtype=np.float64)
    n = z.shape[0]
    if n < 2:
        raise ValueError("MAD needs at least two rows")
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0):
        raise ValueError("MAD is undefined for zero rows")
    unit = z / norms[:, None]
    dist = 1.0 - unit @ unit.T
    np.fill_diagonal(dist, 0.0)
    return float(np.clip(dist.sum(axis=1) / (n - 1), 0.0, 2.0).mean())
