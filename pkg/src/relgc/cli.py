"""Command-line entry point: ``relgc <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .cluster import predict
from .config import RunConfig, dump_config, load_config
from .data import generate_sbm, load_dataset, read_manifest, save_dataset
from .metrics import compute_metrics
from .train import Trainer

log = logging.getLogger("relgc")

# flags that map straight onto RunConfig keys
_OVERRIDES = {
    "n_clusters": int, "lr": float, "epochs": int, "batch_size": int,
    "m1": int, "m2": int, "alpha": float, "eta": float, "beta": float,
    "eps": float, "kappa": float, "perturb_scale": float, "drop_ratio": float,
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI-style config file")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--seed", type=int, help="seed for every random stream")
    for key, kind in _OVERRIDES.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=kind)


def _run_config(args) -> RunConfig:
    overrides = {k: getattr(args, k) for k in _OVERRIDES}
    overrides["dataset"] = args.dataset
    overrides["seed"] = args.seed
    cfg = load_config(args.config, overrides)
    if not cfg.dataset:
        raise SystemExit("error: no dataset given (--dataset or 'dataset' in the config)")
    return cfg


def _load_graph(cfg: RunConfig):
    path = Path(cfg.dataset)
    if not path.is_dir():
        raise SystemExit(f"error: dataset directory not found: {path}")
    graph = load_dataset(path, cfg.knn_k)
    if not cfg.n_clusters:
        k = read_manifest(path).get("n_clusters", 0)
        if k:
            cfg = cfg.replace(n_clusters=int(k))
    return graph, cfg


def _write_labels(path: Path, labels: np.ndarray, k: int) -> None:
    np.savetxt(path, labels, fmt="%d")
    counts = np.bincount(labels, minlength=k).tolist()
    summary = {"n": int(len(labels)), "n_clusters": k, "cluster_sizes": counts}
    path.with_suffix(".json").write_text(json.dumps(summary, indent=2) + "\n")


def cmd_pretrain(args) -> int:
    cfg = _run_config(args)
    graph, cfg = _load_graph(cfg)
    result = Trainer(graph, cfg).pretrain()
    out = save_checkpoint(args.out, result.state, cfg)
    print(f"pretrained checkpoint written to {out}")
    return 0


def _one_run(cfg: RunConfig, graph, out: Path, pretrained: str | None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    trainer = Trainer(graph, cfg)
    if pretrained:
        state, _ = load_checkpoint(pretrained)
    else:
        state = trainer.pretrain().state
    with open(out / "metrics.jsonl", "w") as fh:
        reports = trainer.train(state, metrics_log=fh)
    z_t, q1 = trainer.infer(state)
    labels = predict(q1)
    save_checkpoint(out / "checkpoint", state, cfg)
    dump_config(cfg, out / "config.ini")
    _write_labels(out / "labels.tsv", labels, trainer.k)
    final = {"epochs": len(reports)}
    if graph.labels is not None:
        final.update(compute_metrics(labels, graph.labels).to_dict())
        final.pop("losses")
        final.pop("epoch")
        final.pop("mad")
    (out / "final.json").write_text(json.dumps(final, indent=2, sort_keys=True) + "\n")
    return final


def cmd_train(args) -> int:
    cfg = _run_config(args)
    graph, cfg = _load_graph(cfg)
    out = Path(args.out)
    if args.repeats <= 1:
        final = _one_run(cfg, graph, out, args.pretrained)
        print(json.dumps(final, sort_keys=True))
        return 0
    runs = []
    for r in range(args.repeats):
        run_cfg = cfg.replace(seed=cfg.seed + r)
        runs.append(_one_run(run_cfg, graph, out / f"run{r}", None))
    summary = {}
    for key in ("acc", "nmi", "ari", "f1"):
        vals = [r[key] for r in runs if key in r]
        if vals:
            summary[key] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def _read_labels(path: str) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise SystemExit(f"error: label file not found: {p}")
    return np.loadtxt(p, dtype=np.int64, ndmin=1)


def cmd_eval(args) -> int:
    pred, truth = _read_labels(args.pred), _read_labels(args.truth)
    if pred.shape != truth.shape:
        raise SystemExit(f"error: {len(pred)} predictions vs {len(truth)} labels")
    m = compute_metrics(pred, truth)
    for key in ("acc", "nmi", "ari", "f1"):
        print(f"{key.upper()} {getattr(m, key):.4f}")
    return 0


def _restore(args):
    state, cfg = load_checkpoint(args.checkpoint)
    if args.dataset:
        cfg = cfg.replace(dataset=args.dataset)
    graph, cfg = _load_graph(cfg)
    return Trainer(graph, cfg), state


def cmd_predict(args) -> int:
    trainer, state = _restore(args)
    _, q1 = trainer.infer(state)
    _write_labels(Path(args.out), predict(q1), trainer.k)
    print(f"labels written to {args.out}")
    return 0


def cmd_export(args) -> int:
    trainer, state = _restore(args)
    z_t, _ = trainer.infer(state)
    np.savetxt(args.out, z_t, delimiter="\t", fmt="%.10g")
    print(f"embeddings ({z_t.shape[0]} x {z_t.shape[1]}) written to {args.out}")
    return 0


def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else 0
    graph = generate_sbm(args.n, args.k, args.p_in, args.p_out, args.dim,
                         mean_scale=args.mean_scale, seed=seed)
    manifest = {"name": "sbm", "generator": "planted-partition", "n": args.n,
                "n_clusters": args.k, "p_in": args.p_in, "p_out": args.p_out,
                "dim": args.dim, "mean_scale": args.mean_scale, "seed": seed}
    save_dataset(args.out, graph, manifest)
    print(f"synthetic dataset written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relgc", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="pretrain AE/GAE and initialize centroids")
    _add_run_flags(p)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="pretrain (unless given) and run the main phase")
    _add_run_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--pretrained", help="checkpoint from the pretrain command")
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score predicted labels against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval)

    for name, func, what in (("predict", cmd_predict, "label file"),
                             ("export-embeddings", cmd_export, "TSV of fused embeddings")):
        p = sub.add_parser(name, help=f"write a {what} from a checkpoint")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--dataset", help="override the dataset stored in the checkpoint")
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("gen-synthetic", help="write a stochastic-block-model dataset")
    p.add_argument("--n", type=int, default=150)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--p-in", type=float, default=0.2)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--mean-scale", type=float, default=0.3,
                   help="spread of the block mean vectors (noise has unit variance)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
