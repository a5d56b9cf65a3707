"""Ranking metrics and evaluation helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import make_rng

EVAL_MODES = ("random", "dynamic")


@dataclass
class EvalSplit:
    """Positive pairs and a fixed set of negative pairs, shape ``(n, 2)`` each."""

    positives: np.ndarray
    negatives: np.ndarray

    def __post_init__(self):
        self.positives = np.asarray(self.positives, dtype=np.int64).reshape(-1, 2)
        self.negatives = np.asarray(self.negatives, dtype=np.int64).reshape(-1, 2)


def hits_at_k(pos_scores, neg_scores, k: int = 20) -> float:
    """Share of positives scoring strictly above the k-th best negative.

    A positive tied with the threshold counts as a miss.
    """
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if len(neg) < k:
        raise ValueError(f"need at least {k} negative scores, got {len(neg)}")
    if len(pos) == 0:
        raise ValueError("no positive scores")
    threshold = np.partition(neg, len(neg) - k)[len(neg) - k]
    return float(np.mean(pos > threshold))


def evaluate_split(model, split: EvalSplit, k: int, mode: str, rng=None) -> float:
    pos, _ = model.score_batch(split.positives, rng, mode)
    neg, _ = model.score_batch(split.negatives, rng, mode)
    return hits_at_k(pos, neg, k)


def random_baseline(split: EvalSplit, k: int, seed: int, draws: int = 200) -> float:
    """Expected Hits@k when every pair gets an independent seeded noise score."""
    rng = make_rng(seed)
    total = 0.0
    for _ in range(draws):
        total += hits_at_k(rng.standard_normal(len(split.positives)), rng.standard_normal(len(split.negatives)), k)
    return total / draws


def mf_oracle(g_dst: np.ndarray, positions: np.ndarray, pairs) -> np.ndarray:
    """Matrix-factorization scores ``g_dst[v] . positions[u]`` for each ``(u, v)``."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.array([float(np.dot(g_dst[v], positions[u])) for u, v in pairs])
