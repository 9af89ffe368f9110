"""Relational redundancy-free deep graph clustering on a small numpy autodiff core."""

__version__ = "0.1.0"

from .config import RunConfig, load_config
from .data import generate_sbm, load_dataset, save_dataset
from .graph import Graph, knn_graph, normalize_adjacency, ppr_diffusion
from .metrics import compute_metrics, mad
from .train import Trainer, pretrain, train

__all__ = [
    "Graph", "RunConfig", "Trainer", "compute_metrics", "generate_sbm", "knn_graph",
    "load_config", "load_dataset", "mad", "normalize_adjacency", "ppr_diffusion",
    "pretrain", "save_dataset", "train",
]
