"""Training loop for link prediction: negative sampling, binary cross-entropy
on sigmoid logits, hand-derived backpropagation and Adam."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .config import TrainConfig
from .evaluator import EVAL_MODES, EvalSplit, evaluate_split
from .link import LinkModel, References
from .memory import Graph
from .numeric import AdamState, adam_step, make_rng

logger = logging.getLogger(__name__)

P_CLAMP = 1e-12


@dataclass
class LossReport:
    epoch: int
    loss: float
    train_hits: float | None = None
    hits: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def loss(pos_logits, neg_logits) -> float:
    """Summed binary cross-entropy ``-sum log p_pos - sum log(1 - p_neg)``."""
    # -log(sigmoid(z)) = softplus(-z); bounds match p clamped to [P_CLAMP, 1 - P_CLAMP]
    lo, hi = -np.log1p(-P_CLAMP), -np.log(P_CLAMP)
    pos = np.clip(np.logaddexp(0.0, -np.asarray(pos_logits, dtype=np.float64)), lo, hi)
    neg = np.clip(np.logaddexp(0.0, np.asarray(neg_logits, dtype=np.float64)), lo, hi)
    return float(np.sum(pos) + np.sum(neg))


def loss_grad(logits, labels) -> np.ndarray:
    """``d loss / d logit``; zero where the probability sits on the clamp."""
    p = sigmoid(logits)
    g = p - labels
    g[(p < P_CLAMP) | (p > 1 - P_CLAMP)] = 0.0
    return g


def forbidden_pairs(graph: Graph) -> np.ndarray:
    """Boolean matrix of pairs that may not serve as negatives: edges and self-pairs."""
    n = graph.n_nodes
    forbidden = np.zeros((n, n), dtype=bool)
    if graph.n_edges:
        forbidden[graph.edges[:, 0], graph.edges[:, 1]] = True
        if not graph.directed:
            forbidden[graph.edges[:, 1], graph.edges[:, 0]] = True
    np.fill_diagonal(forbidden, True)
    return forbidden


def sample_negatives(
    graph: Graph,
    count: int,
    rng: np.random.Generator,
    max_rounds: int = 100,
    forbidden: np.ndarray | None = None,
) -> np.ndarray:
    """``count`` uniform non-edges ``(u, v)`` with ``u != v``, distinct within the call."""
    if forbidden is None:
        forbidden = forbidden_pairs(graph)
    return _draw_non_edges(forbidden, count, rng, graph.directed, max_rounds)


def _draw_non_edges(forbidden, count, rng, directed, max_rounds=100) -> np.ndarray:
    n = forbidden.shape[0]
    chunks = []
    have = 0
    seen: set[int] = set()
    for _ in range(max_rounds):
        need = count - have
        if need <= 0:
            break
        cand = rng.integers(0, n, size=(2 * need + 8, 2))
        cand = cand[~forbidden[cand[:, 0], cand[:, 1]]]
        lo, hi = (cand[:, 0], cand[:, 1]) if directed else (cand.min(axis=1), cand.max(axis=1))
        keys = lo * n + hi
        _, first = np.unique(keys, return_index=True)
        first = np.sort(first)
        fresh = [i for i in first if int(keys[i]) not in seen][:need]
        seen.update(int(keys[i]) for i in fresh)
        chunks.append(cand[fresh])
        have += len(fresh)
    if have < count:
        raise RuntimeError(f"found only {have} of {count} non-edges after {max_rounds} rounds")
    return np.vstack(chunks).astype(np.int64)


def batch_loss(model: LinkModel, queries: np.ndarray, labels: np.ndarray, refs: References) -> float:
    cache = model.forward(queries, refs)
    return loss(cache.logits[labels == 1], cache.logits[labels == 0])


def backward(model: LinkModel, queries, labels, refs: References, freeze_weights: bool = False) -> float:
    """Forward pass, then accumulate gradients of the summed loss; returns the loss."""
    labels = np.asarray(labels, dtype=np.float64)
    cache = model.forward(queries, refs)
    model.backward(cache, loss_grad(cache.logits, labels), freeze_weights=freeze_weights)
    return loss(cache.logits[labels == 1], cache.logits[labels == 0])


def make_batch(graph: Graph, positives: np.ndarray, neg_ratio: int, rng, forbidden=None) -> tuple[np.ndarray, np.ndarray]:
    neg = sample_negatives(graph, len(positives) * neg_ratio, rng, forbidden=forbidden)
    queries = np.vstack([positives, neg])
    labels = np.concatenate([np.ones(len(positives)), np.zeros(len(neg))])
    return queries, labels


def train_step(
    model: LinkModel, graph: Graph, positives, adam: AdamState, rng, neg_ratio: int = 1, forbidden=None
) -> float:
    """One Adam step on a batch of positives plus fresh negatives; returns the mean loss."""
    queries, labels = make_batch(graph, positives, neg_ratio, rng, forbidden)
    refs = model.sample_references(queries, rng, model.config.train_mode)
    model.store.zero_grads()
    value = backward(model, queries, labels, refs)
    adam_step(model.store, adam)
    return value / len(queries)


def evaluate(model: LinkModel, splits: dict[str, EvalSplit], k: int, seed: int, epoch: int) -> dict[str, dict[str, float]]:
    out = {}
    for name, split in splits.items():
        out[name] = {}
        for mode in EVAL_MODES:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch, 7919])))
            out[name][mode] = evaluate_split(model, split, k, mode, rng)
    return out


def fit(
    model: LinkModel,
    graph: Graph,
    config: TrainConfig,
    splits: dict[str, EvalSplit] | None = None,
    callback: Callable[[LossReport], None] | None = None,
) -> list[LossReport]:
    """Train ``model`` on the edges of ``graph`` (the training split).

    Evaluation runs every ``eval_every`` epochs and after the last one, in
    both Random and nearest-neighbour reference modes, on each of
    ``splits``. Training Hits@k ranks a fixed sample of training edges
    against the negatives of the first split.
    """
    reports: list[LossReport] = []
    if config.epochs == 0:
        return reports
    splits = splits or {}
    rng = make_rng(config.seed)
    adam = AdamState(lr=config.lr)
    edges = graph.edges
    batch_size = min(config.batch_size, len(edges))
    forbidden = forbidden_pairs(graph)
    train_probe = None
    if splits:
        first = next(iter(splits.values()))
        sample = rng.permutation(len(edges))[: config.max_train_eval]
        train_probe = EvalSplit(edges[np.sort(sample)], first.negatives)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(edges))
        total, count = 0.0, 0
        for start in range(0, len(edges), batch_size):
            pos = edges[order[start : start + batch_size]]
            n_q = len(pos) * (1 + config.neg_ratio)
            total += train_step(model, graph, pos, adam, rng, config.neg_ratio, forbidden) * n_q
            count += n_q
        report = LossReport(epoch, total / count)
        if splits and (epoch % config.eval_every == 0 or epoch == config.epochs):
            report.hits = evaluate(model, splits, config.hits_k, config.seed, epoch)
            report.train_hits = evaluate_split(model, train_probe, config.hits_k, model.config.eval_mode)
        logger.info("epoch %d loss %.5f hits %s", epoch, report.loss, report.hits)
        reports.append(report)
        if callback is not None:
            callback(report)
    return reports
