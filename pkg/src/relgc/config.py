"""Run configuration: defaults, INI-style config files and flag overrides."""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .graph import ConfigError


@dataclass
class RunConfig:
    # data
    dataset: str = ""
    n_clusters: int = 0  # 0: take from labels or the dataset manifest
    knn_k: int = 5
    # architecture
    ae_dims: tuple[int, ...] = (128, 256, 512, 20)
    gae_dims: tuple[int, ...] = (128, 256, 20)
    ae_act: str = "relu"
    gae_act: str = "tanh"
    gae_final_act: str = "linear"
    # loss weights
    alpha: float = 0.1
    eps: float = 5e3
    kappa: float = 10.0
    # relations
    m1: int = 256
    m2: int = 8
    beta: float = 0.8
    log_base: float = 0.0  # 0: natural log
    symmetric_relation: bool = False
    # augmentation
    eta: float = 0.2
    perturb_scale: float = 0.1
    drop_ratio: float = 0.1
    diffusion_topk: int = 0  # 0: dense diffusion view
    # clustering
    shared_centroids: bool = True
    kmeans_restarts: int = 20
    # optimization
    lr: float = 1e-4
    pretrain_lr: float = 1e-3
    batch_size: int = 0  # 0: full batch
    epochs_ae: int = 30
    epochs_gae: int = 30
    epochs_joint: int = 100
    epochs: int = 300
    joint_fusion: bool = True
    early_stop: bool = False
    early_stop_window: int = 20
    early_stop_tol: float = 1e-5
    eval_every: int = 1
    # seeds; -1 derives the stream from ``seed``
    seed: int = 0
    model_seed: int = -1
    aug_seed: int = -1
    sample_seed: int = -1

    def __post_init__(self):
        self.ae_dims = tuple(int(v) for v in self.ae_dims)
        self.gae_dims = tuple(int(v) for v in self.gae_dims)
        self.validate()

    def validate(self) -> None:
        for name in ("alpha", "eps", "kappa", "perturb_scale", "lr", "pretrain_lr"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not 0 < self.eta < 1:
            raise ConfigError(f"eta must lie in (0, 1), got {self.eta}")
        if not 0 < self.beta < 1:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0 <= self.drop_ratio < 1:
            raise ConfigError(f"drop_ratio must lie in [0, 1), got {self.drop_ratio}")
        if self.n_clusters == 1 or self.n_clusters < 0:
            raise ConfigError(f"need at least two clusters, got {self.n_clusters}")
        if self.m1 < 1 or self.m2 < 1:
            raise ConfigError("m1 and m2 must be positive")
        if self.ae_dims[-1] != self.gae_dims[-1]:
            raise ConfigError("AE and GAE latent widths must agree")

    def stream(self, name: str) -> int:
        own = getattr(self, f"{name}_seed")
        offsets = {"model": 0, "aug": 1, "sample": 2}
        return own if own >= 0 else self.seed * 1000 + offsets[name]

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: _coerce(k, v) for k, v in data.items()})


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    kind = _TYPES[key]
    if not isinstance(value, str):
        return value
    text = value.strip()
    if kind == "bool":
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}") from exc
    if kind.startswith("tuple"):
        return tuple(int(v) for v in text.replace(",", " ").split())
    return text


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Read an INI file; section names only group keys, every key is global."""
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            for key, val in parser.items(section):
                values[key] = val
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(values)


def dump_config(cfg: RunConfig, path: str | Path) -> None:
    parser = configparser.ConfigParser()
    parser["run"] = {}
    for key, val in cfg.to_dict().items():
        if isinstance(val, (tuple, list)):
            val = " ".join(str(v) for v in val)
        parser["run"][key] = str(val)
    with open(path, "w") as fh:
        parser.write(fh)
