"""Unary MAD regression.

A label is inferred from memorized examples ``(x_i, y_i)`` as::

    y | y_i = w * y_i + (f(x) - f(x_i)) . g(x)

with affine position map ``f`` and differential map ``g``; estimates are
Softmin-weighted by ``||f(x) - f(x_i)||`` together with Soft Sentinels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregator import Estimate, SentinelConfig, softmin_backward, softmin_forward
from .memory import MemoryAdaptor
from .numeric import AdamState, ParamStore, adam_step, l2_distance, make_rng

UNARY_MODES = ("fixed", "random", "dynamic")


@dataclass
class ReferenceSet:
    indices: np.ndarray
    distances: np.ndarray
    estimates: list[Estimate]


class UnaryModel:
    def __init__(
        self,
        memory_x,
        memory_y,
        dim: int = 8,
        k_refs: int = 8,
        sentinels: SentinelConfig = SentinelConfig(),
        mode: str = "dynamic",
        seed: int = 0,
    ):
        x = np.asarray(memory_x, dtype=np.float64)
        self.memory_x = x.reshape(len(x), -1)
        self.memory_y = np.asarray(memory_y, dtype=np.float64).reshape(-1)
        if len(self.memory_x) == 0 or len(self.memory_x) != len(self.memory_y):
            raise ValueError("memory must be non-empty with one label per input")
        if mode not in UNARY_MODES:
            raise ValueError(f"mode must be one of {UNARY_MODES}")
        self.k_refs = k_refs
        self.sentinels = sentinels
        self.mode = mode
        n_in = self.memory_x.shape[1]
        rng = make_rng(seed)
        self.store = ParamStore()
        scale = 1.0 / np.sqrt(n_in)
        self.store.add("f.weight", rng.uniform(-scale, scale, (dim, n_in)))
        self.store.add("f.bias", np.zeros(dim))
        self.store.add("g.weight", rng.uniform(-scale, scale, (dim, n_in)))
        self.store.add("g.bias", rng.uniform(-scale, scale, dim))
        self.adaptor = MemoryAdaptor(1.0)
        self.adaptor.register(self.store)
        self._fixed = None

    @property
    def n_memory(self) -> int:
        return len(self.memory_y)

    def positions(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.memory_x.shape[1])
        return x @ self.store.value("f.weight").T + self.store.value("f.bias")

    def gradients(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.memory_x.shape[1])
        return x @ self.store.value("g.weight").T + self.store.value("g.bias")

    def set_maps(self, f_weight, f_bias, g_weight, g_bias, w=None) -> None:
        """Overwrite the affine maps (and optionally the adaptor) by hand."""
        for name, value in (("f.weight", f_weight), ("f.bias", f_bias), ("g.weight", g_weight), ("g.bias", g_bias)):
            self.store.set_value(name, np.broadcast_to(value, self.store.value(name).shape))
        if w is not None:
            self.adaptor.w = w

    # reference selection

    def _fixed_table(self) -> np.ndarray:
        # memory-to-memory neighbours in raw feature space, computed once
        if self._fixed is None:
            k = min(self.k_refs, self.n_memory - 1)
            self._fixed = _nearest(self.memory_x, self.memory_x, k, np.arange(self.n_memory)) if k > 0 else None
        return self._fixed

    def choose_batch(self, x, rng=None, query_index=None, mode=None) -> np.ndarray:
        """Reference indices, shape ``(B, K)``. ``query_index[b] >= 0`` marks a
        query that is itself memory element ``query_index[b]``; it is never
        used as its own reference."""
        mode = mode or self.mode
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.memory_x.shape[1])
        qi = np.full(len(x), -1) if query_index is None else np.asarray(query_index).reshape(-1)
        k = self.k_refs
        available = self.n_memory - (1 if np.any(qi >= 0) else 0)
        if k > available:
            raise ValueError(f"cannot choose {k} references from {available} memory entries")
        if mode == "random":
            if rng is None:
                raise ValueError("random mode needs an rng")
            keys = rng.random((len(x), self.n_memory))
            own = qi >= 0
            keys[np.flatnonzero(own), qi[own]] = np.inf
            return np.argpartition(keys, k - 1, axis=1)[:, :k]
        if mode == "fixed":
            out = _nearest(x, self.memory_x, k, qi)
            table = self._fixed_table()
            own = qi >= 0
            if table is not None and np.any(own):
                out[own] = table[qi[own]][:, :k]
            return out
        if mode == "dynamic":
            return _nearest(self.positions(x), self.positions(self.memory_x), k, qi)
        raise ValueError(f"unknown mode {mode!r}")

    # forward / backward

    def forward(self, x, refs):
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.memory_x.shape[1])
        refs = np.asarray(refs, dtype=np.int64)
        px = self.positions(x)
        pr = self.positions(self.memory_x[refs.reshape(-1)]).reshape(*refs.shape, -1)
        gx = self.gradients(x)
        diff = px[:, None, :] - pr
        y_ref = self.memory_y[refs]
        values = self.adaptor.weight[0] * y_ref + np.sum(diff * gx[:, None, :], axis=-1)
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        s = self.sentinels
        pred, weights, unc = softmin_forward(values, dist, s.mass, s.value)
        return pred, unc, (x, refs, diff, dist, y_ref, values, weights, pred, gx)

    def backward(self, cache, d_pred) -> None:
        x, refs, diff, dist, y_ref, values, weights, pred, gx = cache
        d_values, d_dist = softmin_backward(np.asarray(d_pred, dtype=np.float64), values, weights, pred)
        safe = np.where(dist > 0, dist, 1.0)
        d_diff = np.where(dist > 0, d_dist / safe, 0.0)[..., None] * diff + d_values[..., None] * gx[:, None, :]
        d_gx = np.einsum("bk,bkd->bd", d_values, diff)
        xr = self.memory_x[refs]
        # positions enter as f(x) - f(x_ref), so the bias cancels
        self.store.grad("f.weight")[...] += np.einsum("bkd,bp->dp", d_diff, x) - np.einsum("bkd,bkp->dp", d_diff, xr)
        self.store.grad("g.weight")[...] += d_gx.T @ x
        self.store.grad("g.bias")[...] += d_gx.sum(axis=0)
        self.store.grad("adaptor.w")[0] += float(np.sum(d_values * y_ref))


def _nearest(queries: np.ndarray, points: np.ndarray, k: int, exclude: np.ndarray) -> np.ndarray:
    diff = queries[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    own = exclude >= 0
    dist[np.flatnonzero(own), exclude[own]] = np.inf
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def estimate_from_reference(model: UnaryModel, x, ref_index: int) -> Estimate:
    if not 0 <= ref_index < model.n_memory:
        raise IndexError(f"reference {ref_index} outside memory of size {model.n_memory}")
    fx = model.positions(x)[0]
    fr = model.positions(model.memory_x[ref_index])[0]
    gx = model.gradients(x)[0]
    value = model.adaptor.adapt(model.memory_y[ref_index]) + float(np.dot(fx - fr, gx))
    return Estimate(float(value), l2_distance(fx, fr))


def choose_references(model: UnaryModel, x, rng=None, query_index: int | None = None, mode: str | None = None) -> ReferenceSet:
    qi = None if query_index is None else [query_index]
    idx = model.choose_batch(x, rng, qi, mode)[0]
    estimates = [estimate_from_reference(model, x, int(i)) for i in idx]
    return ReferenceSet(idx, np.array([e.distance for e in estimates]), estimates)


def predict_unary(model: UnaryModel, x, rng=None, query_index: int | None = None, mode: str | None = None) -> tuple[float, float]:
    qi = None if query_index is None else [query_index]
    refs = model.choose_batch(x, rng, qi, mode)
    pred, unc, _ = model.forward(x, refs)
    return float(pred[0]), float(unc[0])


def predict_batch(model: UnaryModel, x, rng=None, query_index=None, mode: str | None = None):
    refs = model.choose_batch(x, rng, query_index, mode)
    pred, unc, _ = model.forward(x, refs)
    return pred, unc


def mse_and_grad(model: UnaryModel, x, y, refs) -> float:
    """Mean squared error of the batch; accumulates its gradient into the store."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    pred, _, cache = model.forward(x, refs)
    err = pred - y
    model.backward(cache, 2.0 * err / len(y))
    return float(np.mean(err * err))


def train_unary(
    model: UnaryModel,
    x,
    y,
    epochs: int = 200,
    lr: float = 0.005,
    seed: int = 0,
    batch_size: int = 64,
    frozen=(),
    train_mode: str = "random",
    in_memory: bool = True,
) -> list[float]:
    """Adam on squared error; returns the per-epoch mean training MSE.

    With ``in_memory`` the training inputs are the memory itself, and each
    example is excluded from its own references.
    """
    x = np.asarray(x, dtype=np.float64).reshape(len(y), -1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(y) == 0:
        raise ValueError("empty dataset")
    rng = make_rng(seed)
    adam = AdamState(lr=lr)
    frozen = frozenset(model.store.resolve(n) for n in frozen)
    curve = []
    for _ in range(epochs):
        order = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), batch_size):
            b = order[start : start + batch_size]
            refs = model.choose_batch(x[b], rng, b if in_memory else None, train_mode)
            model.store.zero_grads()
            total += mse_and_grad(model, x[b], y[b], refs) * len(b)
            adam_step(model.store, adam, frozen)
        curve.append(total / len(y))
    return curve
