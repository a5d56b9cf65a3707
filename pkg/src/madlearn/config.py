"""Experiment configuration. Defaults follow the published setup: Adam at
lr 0.005, K = 8 references, 32-dim encodings, one head, 8 Soft Sentinels
at distance 1, Random references for training and nearest neighbours
for evaluation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

ABLATIONS = ("mad", "nograd", "nomem")
AGGREGATORS = ("mean", "softmin", "sentinel")
REF_MODES = ("random", "dynamic", "origin")
DIRECTIONS = ("both", "u0", "v0")


@dataclass
class MadConfig:
    dim: int = 32
    heads: int = 1
    k_refs: int = 8
    n_sentinels: int = 8
    sentinel_distance: float = 1.0
    aggregator: str = "sentinel"
    ablation: str = "mad"
    train_mode: str = "random"
    eval_mode: str = "dynamic"
    # "u0" keeps only references sharing the destination node; "origin"
    # mode with "u0" is the matrix-factorization reduction
    directions: str = "both"
    shared: bool | None = None  # None: share g tables iff the graph is undirected
    adaptor_init: float = 1.0
    seed: int = 0

    def __post_init__(self):
        _check_choice("ablation", self.ablation, ABLATIONS)
        _check_choice("aggregator", self.aggregator, AGGREGATORS)
        _check_choice("train_mode", self.train_mode, REF_MODES)
        _check_choice("eval_mode", self.eval_mode, REF_MODES)
        _check_choice("directions", self.directions, DIRECTIONS)
        for name in ("dim", "heads", "k_refs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_sentinels < 0 or self.sentinel_distance < 0:
            raise ValueError("sentinel count and distance must be >= 0")


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 1024
    neg_ratio: int = 1
    lr: float = 0.005
    seed: int = 0
    eval_every: int = 10
    hits_k: int = 20
    n_eval_negatives: int = 200
    max_train_eval: int = 1000

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("batch_size", "neg_ratio", "eval_every", "hits_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


def _check_choice(name, value, choices):
    if value not in choices:
        raise ValueError(f"{name} must be one of {choices}, got {value!r}")


def to_dict(cfg) -> dict:
    return asdict(cfg)


def from_dict(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)
