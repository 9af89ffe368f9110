"""Checkpoints: one flat little-endian float64 blob plus a JSON manifest.

``manifest.json`` lists every array (parameters, Adam moments, the AE
embedding used for edge deletion) with its shape and element offset into
``tensors.bin``, together with the epoch counter, Adam scalars, seeds and
the run configuration.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import tensor as T
from .cluster import FusionParams
from .config import RunConfig
from .model import ModelState
from .nets import AEParams, GAEParams
from .tensor import AdamState

FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


def _collect(state: ModelState) -> dict[str, np.ndarray]:
    arrays = {f"param/{k}": t.data for k, t in state.named().items()}
    if state.adam is not None:
        arrays.update({f"adam_m/{k}": v for k, v in state.adam.m.items()})
        arrays.update({f"adam_v/{k}": v for k, v in state.adam.v.items()})
    if state.z_pre is not None:
        arrays["z_pre"] = state.z_pre
    return arrays


def save_checkpoint(path: str | Path, state: ModelState, cfg: RunConfig) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    arrays = _collect(state)
    with open(root / "tensors.bin", "wb") as fh:
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype=_DTYPE)
            fh.write(arr.tobytes())
            entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
            offset += arr.size
    adam = state.adam
    manifest = {
        "format": FORMAT_VERSION,
        "epoch": state.epoch,
        "adam": None if adam is None else {"lr": adam.lr, "beta1": adam.beta1,
                                           "beta2": adam.beta2, "eps": adam.eps,
                                           "step": adam.step},
        "activations": {"ae": state.ae.hidden_act, "gae": state.gae.hidden_act,
                        "gae_final": state.gae.final_act},
        "seeds": {s: cfg.stream(s) for s in ("model", "aug", "sample")},
        "config": cfg.to_dict(),
        "tensors": entries,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return root


def load_checkpoint(path: str | Path) -> tuple[ModelState, RunConfig]:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    if manifest.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {manifest.get('format')}")
    blob = np.fromfile(root / "tensors.bin", dtype=_DTYPE)
    arrays = {}
    for e in manifest["tensors"]:
        size = int(np.prod(e["shape"]))
        arrays[e["name"]] = blob[e["offset"]:e["offset"] + size].reshape(e["shape"]).astype(np.float64)

    def group(prefix: str) -> list[T.Tensor]:
        keys = sorted((k for k in arrays if k.startswith(f"param/{prefix}.")),
                      key=lambda k: int(k.rsplit(".", 1)[1]))
        return [T.parameter(arrays[k]) for k in keys]

    acts = manifest["activations"]
    ae = AEParams(group("ae.enc_w"), group("ae.enc_b"), group("ae.dec_w"), group("ae.dec_b"),
                  acts["ae"])
    gae = GAEParams(group("gae.enc_w"), group("gae.dec_w"), acts["gae"], acts["gae_final"])
    fusion = FusionParams(T.parameter(arrays["param/fusion.w1"]),
                          T.parameter(arrays["param/fusion.w2"]),
                          T.parameter(arrays["param/fusion.delta"]))
    state = ModelState(ae, gae, fusion, epoch=manifest["epoch"])
    for name in ("mu", "mu_ae", "mu_gae"):
        if f"param/{name}" in arrays:
            setattr(state, name, T.parameter(arrays[f"param/{name}"]))
    if manifest["adam"] is not None:
        state.adam = AdamState(**manifest["adam"])
        for k in arrays:
            if k.startswith("adam_m/"):
                state.adam.m[k[7:]] = arrays[k]
            elif k.startswith("adam_v/"):
                state.adam.v[k[7:]] = arrays[k]
    state.z_pre = arrays.get("z_pre")
    cfg = RunConfig.from_dict(manifest["config"])
    return state, cfg
