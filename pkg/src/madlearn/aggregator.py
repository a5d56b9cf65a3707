"""Combining per-reference estimates: mean, Softmin, Softmin with Soft Sentinels.

A Soft Sentinel is a dummy estimate with logit ``value`` (0) at a fixed
``distance``. ``k`` of them add ``k * exp(-distance)`` to the Softmin
normaliser; their total weight is reported as the prediction's uncertainty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class Estimate(NamedTuple):
    value: float
    distance: float


@dataclass(frozen=True)
class SentinelConfig:
    k: int = 8
    distance: float = 1.0
    value: float = 0.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"sentinel count must be >= 0, got {self.k}")
        if self.distance < 0:
            raise ValueError(f"sentinel distance must be >= 0, got {self.distance}")

    @property
    def mass(self) -> float:
        """Unnormalised Softmin mass of all sentinels together."""
        return self.k * math.exp(-self.distance)


NO_SENTINELS = SentinelConfig(k=0)


def aggregate_mean(estimates: Sequence[Estimate]) -> float:
    if len(estimates) == 0:
        raise ValueError("cannot aggregate an empty set of estimates")
    return float(np.mean([e.value for e in estimates]))


def softmin_weights(distances: Sequence[float], sentinels: SentinelConfig = NO_SENTINELS) -> tuple[list[float], float]:
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0 and sentinels.k == 0:
        raise ValueError("no estimates and no sentinels to weight")
    if d.size and (not np.all(np.isfinite(d)) or d.min() < 0):
        raise ValueError("distances must be finite and non-negative")
    e = np.exp(-d)
    z = sentinels.mass + e.sum()
    return (e / z).tolist(), sentinels.mass / z


def aggregate_softmin(estimates: Sequence[Estimate], sentinels: SentinelConfig = NO_SENTINELS) -> tuple[float, float]:
    """Returns ``(prediction, uncertainty)``."""
    weights, sentinel_weight = softmin_weights([e.distance for e in estimates], sentinels)
    pred = sum(w * e.value for w, e in zip(weights, estimates))
    # sentinel logit is normally 0; kept general for completeness
    pred += sentinel_weight * sentinels.value
    return float(pred), float(sentinel_weight)


# Batched versions used by the models. The last axis indexes references.


def softmin_forward(values: np.ndarray, dists: np.ndarray, sentinel_mass: float, sentinel_value: float = 0.0):
    """Returns ``(pred, weights, sentinel_weight)`` with weights shaped like ``values``."""
    e = np.exp(-dists)
    z = sentinel_mass + e.sum(axis=-1)
    weights = e / z[..., None]
    sw = sentinel_mass / z
    pred = np.sum(weights * values, axis=-1) + sw * sentinel_value
    return pred, weights, sw


def softmin_backward(d_pred: np.ndarray, values: np.ndarray, weights: np.ndarray, pred: np.ndarray, freeze_weights: bool = False):
    """Gradients of the loss w.r.t. values and distances.

    ``d pred / d dist_i = -w_i (value_i - pred)``, which holds with or
    without sentinels since they only enter through the normaliser.
    ``freeze_weights`` drops the distance term and exists to show that the
    finite-difference check catches the omission.
    """
    d_values = d_pred[..., None] * weights
    if freeze_weights:
        return d_values, np.zeros_like(values)
    d_dists = -d_pred[..., None] * weights * (values - pred[..., None])
    return d_values, d_dists


def mean_forward(values: np.ndarray):
    n = values.shape[-1]
    weights = np.full(values.shape, 1.0 / n)
    return values.mean(axis=-1), weights, np.zeros(values.shape[:-1])
