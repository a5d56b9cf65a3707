"""``mad`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every run writes ``config.json`` (the fully resolved configuration) into
``--out``; passing it back through ``--config`` repeats the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data
from .ablation import GRIDS, run_ablation
from .aggregator import SentinelConfig
from .config import ABLATIONS, AGGREGATORS, REF_MODES, MadConfig, TrainConfig, from_dict, to_dict
from .encoder import knn_positions
from .evaluator import random_baseline
from .link import LinkModel
from .memory import AdjacencyMemory
from .trainer import evaluate, fit
from .unary import UnaryModel, predict_batch, train_unary

logger = logging.getLogger("madlearn")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3

# CLI flag -> MadConfig / TrainConfig field
MAD_FLAGS = {
    "dim": "dim",
    "heads": "heads",
    "k": "k_refs",
    "sentinels": "n_sentinels",
    "sentinel_distance": "sentinel_distance",
    "aggregator": "aggregator",
    "ablation": "ablation",
    "train_mode": "train_mode",
    "eval_mode": "eval_mode",
}
TRAIN_FLAGS = {
    "epochs": "epochs",
    "batch_size": "batch_size",
    "neg_ratio": "neg_ratio",
    "lr": "lr",
    "eval_every": "eval_every",
    "hits_k": "hits_k",
    "negatives": "n_eval_negatives",
}
PAPER_PRESET = {"heads": 12, "dim": 12}


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser, training: bool = True) -> None:
    p.add_argument("--config", help="resolved config.json from an earlier run")
    p.add_argument("--out", help="output directory (default: runs/<command>)")
    p.add_argument("--seed", type=int)
    p.add_argument("--dataset", help="builtin name (karate, sbm), ogbl-ddi, or path to a TSV edge list")
    p.add_argument("--valid-edges", help="validation edge list; skips random splitting")
    p.add_argument("--test-edges", help="test edge list; skips random splitting")
    p.add_argument("--directed", action="store_true", default=None)
    p.add_argument("--split", help="train,valid,test fractions (default 0.9,0.05,0.05)")
    p.add_argument("-v", "--verbose", action="store_true")
    if not training:
        return
    p.add_argument("--preset", choices=["paper"], help="paper: 12 heads, 12-dim encodings")
    p.add_argument("--dim", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--k", type=int, help="references per side")
    p.add_argument("--sentinels", type=int)
    p.add_argument("--sentinel-distance", type=float)
    p.add_argument("--aggregator", choices=AGGREGATORS)
    p.add_argument("--ablation", choices=ABLATIONS)
    p.add_argument("--train-mode", choices=REF_MODES)
    p.add_argument("--eval-mode", choices=REF_MODES)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--neg-ratio", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--hits-k", type=int)
    p.add_argument("--negatives", type=int, help="fixed evaluation negatives per split")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mad", description="Memory-associated differential learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a link predictor")
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a saved link predictor")
    _add_common(p, training=False)
    p.add_argument("--model", required=True)
    p.add_argument("--hits-k", type=int)
    p.add_argument("--negatives", type=int)

    p = sub.add_parser("ablate", help="run an ablation grid over seeds")
    _add_common(p)
    p.add_argument("--grid", choices=sorted(GRIDS))
    p.add_argument("--seeds", help="comma separated, e.g. 1,2,3")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("export-embeddings", help="train and export positions and gradients as CSV")
    _add_common(p)

    p = sub.add_parser("unary-demo", help="unary regression on a toy function or a CSV file")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--csv", help="CSV with header; last column is the label")
    p.add_argument("--samples", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--sentinels", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("knn", help="nearest neighbours of a node in a saved model's position space")
    p.add_argument("--model", required=True)
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--head", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _parse_split(text):
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad --split {text!r}") from None
    if len(parts) != 3:
        raise UsageError("--split needs three fractions")
    return list(parts)


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, an optional config file, explicit flags and MAD_SEED."""
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise data.DataError(f"cannot read config {args.config}: {exc}") from None
    cfg = {
        "command": args.command,
        "dataset": "karate",
        "valid_edges": None,
        "test_edges": None,
        "directed": False,
        "split": [0.9, 0.05, 0.05],
        "seed": 0,
        "preset": None,
        "mad": to_dict(MadConfig()),
        "train": to_dict(TrainConfig()),
    }
    for key in ("dataset", "valid_edges", "test_edges", "directed", "split", "seed", "preset"):
        if key in base:
            cfg[key] = base[key]
    cfg["mad"].update(base.get("mad", {}))
    cfg["train"].update(base.get("train", {}))
    for key in ("grid", "seeds", "model"):
        if key in base:
            cfg[key] = base[key]
    explicit = {k: v for k, v in vars(args).items() if v is not None}
    if explicit.get("preset") == "paper":
        cfg["preset"] = "paper"
        cfg["mad"].update(PAPER_PRESET)
    for flag in ("dataset", "valid_edges", "test_edges", "directed", "seed"):
        if flag in explicit:
            cfg[flag] = explicit[flag]
    if "split" in explicit:
        cfg["split"] = _parse_split(explicit["split"])
    for flag, key in MAD_FLAGS.items():
        if flag in explicit:
            cfg["mad"][key] = explicit[flag]
    for flag, key in TRAIN_FLAGS.items():
        if flag in explicit:
            cfg["train"][key] = explicit[flag]
    for flag in ("grid", "seeds", "model"):
        if flag in explicit:
            cfg[flag] = explicit[flag]
    if os.environ.get("MAD_SEED"):
        try:
            cfg["seed"] = int(os.environ["MAD_SEED"])
        except ValueError:
            raise UsageError(f"MAD_SEED must be an integer, got {os.environ['MAD_SEED']!r}") from None
    cfg["mad"]["seed"] = cfg["seed"]
    cfg["train"]["seed"] = cfg["seed"]
    try:
        from_dict(MadConfig, cfg["mad"])
        from_dict(TrainConfig, cfg["train"])
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return cfg


def load_dataset(cfg: dict, seed: int) -> data.LinkDataset:
    name = cfg["dataset"]
    n_neg = cfg["train"]["n_eval_negatives"]
    if name in ("karate", "sbm"):
        return data.make_link_dataset(data.builtin_graph(name, seed), seed, cfg["split"], n_neg, name)
    if name == "ogbl-ddi":
        return data.load_ogbl_ddi()
    if not Path(name).exists():
        raise data.DataError(f"dataset {name!r} is neither a builtin nor an existing file")
    directed = bool(cfg["directed"])
    if cfg["valid_edges"] or cfg["test_edges"]:
        train = data.load_edge_list(name, directed)
        parts = {k: data.load_edge_list(cfg[k + "_edges"], directed) for k in ("valid", "test") if cfg[k + "_edges"]}
        n = max([train.n_nodes] + [g.n_nodes for g in parts.values()])
        train = data.Graph(n, train.edges, directed)
        full = data.Graph(n, np.vstack([train.edges] + [g.edges for g in parts.values()]), directed)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
        negs = data.eval_negatives(full, n_neg, len(parts), rng)
        splits = {k: data.EvalSplit(g.edges, negs[i]) for i, (k, g) in enumerate(parts.items())}
        return data.LinkDataset(Path(name).stem, full, train, splits)
    graph = data.load_edge_list(name, directed)
    return data.make_link_dataset(graph, seed, cfg["split"], n_neg, Path(name).stem)


def _out_dir(args, command: str) -> Path:
    out = Path(args.out or Path("runs") / command)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build_model(cfg: dict, ds: data.LinkDataset) -> LinkModel:
    mad = from_dict(MadConfig, cfg["mad"])
    return LinkModel(ds.full.n_nodes, AdjacencyMemory.from_graph(ds.train), mad, ds.full.directed)


def cmd_train(args, cfg) -> int:
    out = _out_dir(args, "train")
    ds = load_dataset(cfg, cfg["seed"])
    model = _build_model(cfg, ds)
    reports = fit(model, ds.train, from_dict(TrainConfig, cfg["train"]), ds.splits)
    data.write_json(cfg, out / "config.json")
    data.export_metrics(reports, out / "metrics.json")
    model.save(out / "model.bin")
    if reports:
        last = reports[-1]
        print(f"epoch {last.epoch} loss {last.loss:.5f} hits@{cfg['train']['hits_k']} {json.dumps(last.hits)}")
    return 0


def cmd_eval(args, cfg) -> int:
    out = _out_dir(args, "eval")
    model = LinkModel.load(cfg["model"])
    ds = load_dataset(cfg, cfg["seed"])
    if ds.full.n_nodes != model.n_nodes:
        raise data.DataError(f"model has {model.n_nodes} nodes, dataset {ds.full.n_nodes}")
    k = cfg["train"]["hits_k"]
    result = {
        "hits_k": k,
        "hits": evaluate(model, ds.splits, k, cfg["seed"], 0),
        "random_baseline": {name: random_baseline(s, k, cfg["seed"]) for name, s in ds.splits.items()},
    }
    data.write_json(cfg, out / "config.json")
    data.write_json(result, out / "eval.json")
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_ablate(args, cfg) -> int:
    out = _out_dir(args, "ablate")
    cfg.setdefault("grid", "fig3a")
    cfg.setdefault("seeds", "1,2,3")
    try:
        seeds = [int(s) for s in str(cfg["seeds"]).split(",") if s]
    except ValueError:
        raise UsageError(f"bad --seeds {cfg['seeds']!r}") from None
    datasets = {s: load_dataset(cfg, s) for s in seeds}
    result = run_ablation(
        cfg["grid"],
        datasets,
        from_dict(MadConfig, cfg["mad"]),
        from_dict(TrainConfig, cfg["train"]),
        jobs=args.jobs,
    )
    data.write_json(cfg, out / "config.json")
    result.write_csv(out / "ablation.csv")
    data.write_json(result.summary(), out / "ablation_summary.json")
    for s in result.seeds:
        print(s, " ".join(f"{c}={result.final(s, c):.4f}" for c in result.columns))
    return 0


def cmd_export(args, cfg) -> int:
    out = _out_dir(args, "export-embeddings")
    ds = load_dataset(cfg, cfg["seed"])
    model = _build_model(cfg, ds)
    reports = fit(model, ds.train, from_dict(TrainConfig, cfg["train"]), ds.splits)
    data.write_json(cfg, out / "config.json")
    data.export_metrics(reports, out / "metrics.json")
    data.export_embeddings(model, out / "embeddings.csv")
    if ds.full.labels is not None:
        with open(out / "node_labels.csv", "w", encoding="utf-8") as fh:
            fh.write("node,label\n")
            fh.writelines(f"{i},{int(c)}\n" for i, c in enumerate(ds.full.labels))
    print(f"wrote {out / 'embeddings.csv'}")
    return 0


def cmd_unary(args, cfg) -> int:
    out = _out_dir(args, "unary-demo")
    base = json.loads(Path(args.config).read_text()) if args.config else {}
    ucfg = {"csv": None, "samples": 64, "dim": 8, "k": 8, "sentinels": 8, "epochs": 300, "lr": 0.005}
    ucfg.update(base.get("unary", {}))
    for key in ucfg:
        if getattr(args, key, None) is not None:
            ucfg[key] = getattr(args, key)
    seed = cfg["seed"]
    if ucfg["csv"]:
        x, y = data.load_regression_csv(ucfg["csv"])
    else:
        x = np.linspace(0.0, 1.0, ucfg["samples"]).reshape(-1, 1)
        y = 2.0 * x[:, 0]
    model = UnaryModel(x, y, ucfg["dim"], ucfg["k"], SentinelConfig(ucfg["sentinels"]), seed=seed)
    curve = train_unary(model, x, y, ucfg["epochs"], ucfg["lr"], seed=seed)
    pred, unc = predict_batch(model, x, query_index=np.arange(len(y)), mode="dynamic")
    result = {
        "train_mse_curve": curve,
        "eval_mse": float(np.mean((pred - y) ** 2)),
        "baseline_mse": float(np.var(y)),
        "mean_uncertainty": float(np.mean(unc)),
    }
    data.write_json({"command": "unary-demo", "seed": seed, "unary": ucfg}, out / "config.json")
    data.write_json(result, out / "unary.json")
    print(f"eval mse {result['eval_mse']:.6f} vs mean-predictor {result['baseline_mse']:.6f}")
    return 0


def cmd_knn(args) -> int:
    model = LinkModel.load(args.model)
    if not 0 <= args.head < len(model.heads):
        raise UsageError(f"--head must be in [0, {len(model.heads)})")
    table = model.heads[args.head]
    ids = knn_positions(table, args.node, args.k, exclude={args.node})
    for i in ids:
        print(i, repr(float(np.linalg.norm(table.positions[i] - table.positions[args.node]))))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "knn":
            return cmd_knn(args)
        if args.command == "unary-demo":
            seed = json.loads(Path(args.config).read_text()).get("seed", 0) if args.config else 0
            if args.seed is not None:
                seed = args.seed
            if os.environ.get("MAD_SEED"):
                seed = int(os.environ["MAD_SEED"])
            return cmd_unary(args, {"seed": seed})
        cfg = resolve(args)
        handler = {"train": cmd_train, "eval": cmd_eval, "ablate": cmd_ablate, "export-embeddings": cmd_export}
        return handler[args.command](args, cfg)
    except UsageError as exc:
        print(f"mad: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (data.DataError, OSError, IndexError, KeyError, ValueError, RuntimeError) as exc:
        print(f"mad: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"mad: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
