"""Edge-list loading, splitting, builtin graphs and CSV/JSON exports."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .evaluator import EvalSplit
from .memory import Graph
from .trainer import _draw_non_edges, forbidden_pairs

logger = logging.getLogger(__name__)

METRICS_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["epoch", "loss", "train_hits", "hits"],
        "properties": {
            "epoch": {"type": "integer", "minimum": 1},
            "loss": {"type": "number", "minimum": 0},
            "train_hits": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
            "hits": {
                "type": "object",
                "additionalProperties": {
                    "type": "object",
                    "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
        "additionalProperties": False,
    },
}


class DataError(ValueError):
    """Malformed or unusable input data."""


def load_edge_list(
    path,
    directed: bool = False,
    n_nodes: int | None = None,
    allow_self_loops: bool = False,
) -> Graph:
    """Parse ``src<TAB>dst`` lines (any whitespace accepted); ``#`` lines are comments."""
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(parts)}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            if u < 0 or v < 0:
                raise DataError(f"{path}:{lineno}: negative node id")
            if u == v and not allow_self_loops:
                raise DataError(f"{path}:{lineno}: self-loop {u}-{v} (allow with allow_self_loops)")
            edges.append((u, v))
    if not edges:
        raise DataError(f"{path}: no edges")
    arr = np.array(edges, dtype=np.int64)
    n = int(arr.max()) + 1 if n_nodes is None else n_nodes
    if arr.max() >= n:
        raise DataError(f"{path}: node id {int(arr.max())} exceeds n_nodes={n}")
    graph = Graph(n, arr, directed)
    if graph.n_duplicates:
        logger.warning("%s: collapsed %d duplicate edges", path, graph.n_duplicates)
    return graph


def karate() -> Graph:
    """Zachary's karate club with club membership as node labels."""
    root = resources.files("madlearn") / "data"
    with resources.as_file(root / "karate.tsv") as p:
        graph = load_edge_list(p)
    labels = np.zeros(graph.n_nodes, dtype=np.int64)
    with resources.as_file(root / "karate_clubs.tsv") as p:
        for line in p.read_text().splitlines():
            if line and not line.startswith("#"):
                node, club = line.split()
                labels[int(node)] = int(club)
    graph.labels = labels
    return graph


def generate_sbm(n: int, blocks: int, p_in: float, p_out: float, rng: np.random.Generator) -> Graph:
    """Undirected stochastic block model with near-equal contiguous blocks."""
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    labels = np.repeat(np.arange(blocks), [len(c) for c in np.array_split(np.arange(n), blocks)])
    iu, ju = np.triu_indices(n, k=1)
    p = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(len(iu)) < p
    return Graph(n, np.stack([iu[keep], ju[keep]], axis=1), directed=False, labels=labels)


def split_counts(n_edges: int, fractions) -> tuple[int, int, int]:
    """Validation and test sizes are rounded half-up; training takes the rest."""
    f_train, f_valid, f_test = fractions
    if min(fractions) < 0 or not math.isclose(f_train + f_valid + f_test, 1.0, abs_tol=1e-9):
        raise ValueError(f"split fractions must be non-negative and sum to 1, got {fractions}")
    n_valid = math.floor(n_edges * f_valid + 0.5)
    n_test = math.floor(n_edges * f_test + 0.5)
    n_train = n_edges - n_valid - n_test
    for name, frac, cnt in (("train", f_train, n_train), ("valid", f_valid, n_valid), ("test", f_test, n_test)):
        if frac > 0 and cnt <= 0:
            raise ValueError(f"{name} split is empty for {n_edges} edges at fraction {frac}")
    return n_train, n_valid, n_test


def split_edges(graph: Graph, fractions=(0.9, 0.05, 0.05), rng: np.random.Generator | None = None):
    """Random disjoint train/valid/test edge arrays."""
    n_train, n_valid, _ = split_counts(graph.n_edges, fractions)
    order = rng.permutation(graph.n_edges) if rng is not None else np.arange(graph.n_edges)
    edges = graph.edges[order]
    return edges[:n_train], edges[n_train : n_train + n_valid], edges[n_train + n_valid :]


@dataclass
class LinkDataset:
    name: str
    full: Graph
    train: Graph
    splits: dict[str, EvalSplit]


def eval_negatives(graph: Graph, count: int, n_splits: int, rng) -> list[np.ndarray]:
    """Distinct non-edges of the full graph, ``count`` per split, no pair shared between splits."""
    pool = _draw_non_edges(forbidden_pairs(graph), count * n_splits, rng, graph.directed)
    return [pool[i * count : (i + 1) * count] for i in range(n_splits)]


def make_link_dataset(
    graph: Graph,
    seed: int,
    fractions=(0.9, 0.05, 0.05),
    n_negatives: int = 200,
    name: str = "graph",
) -> LinkDataset:
    """Split ``graph`` and draw fixed evaluation negatives, all from ``seed``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
    train, valid, test = split_edges(graph, fractions, rng)
    negs = eval_negatives(graph, n_negatives, 2, rng)
    splits = {}
    if len(valid):
        splits["valid"] = EvalSplit(valid, negs[0])
    if len(test):
        splits["test"] = EvalSplit(test, negs[1])
    return LinkDataset(name, graph, graph.subgraph(train), splits)


def builtin_graph(name: str, seed: int = 0) -> Graph:
    if name == "karate":
        return karate()
    if name == "sbm":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 2])))
        return generate_sbm(200, 2, 0.15, 0.02, rng)
    raise DataError(f"unknown builtin dataset {name!r}")


def load_ogbl_ddi(root="dataset") -> LinkDataset:
    """ogbl-ddi with its official split and negatives; needs the optional ``ogb`` package."""
    try:
        from ogb.linkproppred import LinkPropPredDataset
    except ImportError:
        raise DataError("ogbl-ddi needs the optional 'ogb' package (pip install ogb)") from None
    ds = LinkPropPredDataset(name="ogbl-ddi", root=str(root))
    split = ds.get_edge_split()
    n = int(ds[0]["num_nodes"])
    train = Graph(n, split["train"]["edge"])
    full = Graph(n, np.vstack([split[k]["edge"] for k in ("train", "valid", "test")]))
    splits = {k: EvalSplit(split[k]["edge"], split[k]["edge_neg"]) for k in ("valid", "test")}
    return LinkDataset("ogbl-ddi", full, train, splits)


def _fmt(x) -> str:
    return repr(float(x))


def export_embeddings(model, path) -> None:
    """One CSV row per node (and head): positions then destination gradients.

    A ``head`` column leads when there are several heads; directed models
    with separate source tables append ``src_grad_*`` columns.
    """
    heads = list(model.heads)
    d = heads[0].dim
    multi = len(heads) > 1
    header = (["head"] if multi else []) + ["node"] + [f"pos_{i}" for i in range(d)] + [f"grad_{i}" for i in range(d)]
    if not model.shared:
        header += [f"src_grad_{i}" for i in range(d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for h, head in enumerate(heads):
            for node in range(head.n_nodes):
                row = ([h] if multi else []) + [node]
                row += [_fmt(x) for x in head.positions[node]] + [_fmt(x) for x in head.grads_dst[node]]
                if not model.shared:
                    row += [_fmt(x) for x in head.grads_src[node]]
                writer.writerow(row)


def read_embeddings(path) -> dict[str, np.ndarray]:
    """Inverse of :func:`export_embeddings`: arrays shaped ``(H, n, d)`` keyed by column prefix."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=np.float64)
    col = {name: i for i, name in enumerate(header)}
    heads = body[:, col["head"]].astype(int) if "head" in col else np.zeros(len(body), dtype=int)
    n_heads = heads.max() + 1
    out = {}
    for prefix in ("pos", "grad", "src_grad"):
        idx = [col[c] for c in header if c.rsplit("_", 1)[0] == prefix]
        if idx:
            out[prefix] = body[:, idx].reshape(n_heads, -1, len(idx))
    out["node"] = body[:, col["node"]].astype(int).reshape(n_heads, -1)
    return out


def export_metrics(reports, path) -> None:
    data = [r.to_dict() if hasattr(r, "to_dict") else dict(r) for r in reports]
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_regression_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Numeric CSV with a header row; the last column is the label."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise DataError(f"{path}: need a header and at least one data row")
    try:
        body = np.array(rows[1:], dtype=np.float64)
    except ValueError:
        raise DataError(f"{path}: non-numeric value") from None
    if body.ndim != 2 or body.shape[1] < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")
    return body[:, :-1], body[:, -1]
