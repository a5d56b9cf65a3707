"""Small dense-array toolkit: parameter store, Adam, seeded RNG and a
finite-difference gradient checker.

Arrays are plain ``numpy.ndarray`` objects of dtype float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

DTYPE = np.float64


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the same seed yields the same stream on every platform."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def dot(a, b) -> float:
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    _check_same_shape(a, b)
    return float(np.sum(a * b))


def l2_distance(a, b) -> float:
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    _check_same_shape(a, b)
    # hypot scales internally, so tiny differences do not underflow to 0
    return math.hypot(*(a - b).ravel())


class ParamStore:
    """Named learnable arrays, each paired with a gradient buffer of the same shape.

    ``alias(name, target)`` makes ``name`` resolve to the slot of ``target``,
    which is how shared source/destination differential tables are stored
    as a single parameter.
    """

    def __init__(self) -> None:
        self._values: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}
        self._aliases: dict[str, str] = {}

    def add(self, name: str, value) -> np.ndarray:
        if name in self._values or name in self._aliases:
            raise KeyError(f"parameter {name!r} already registered")
        value = np.array(value, dtype=DTYPE)
        self._values[name] = value
        self._grads[name] = np.zeros_like(value)
        return value

    def alias(self, name: str, target: str) -> None:
        target = self.resolve(target)
        if name in self._values or name in self._aliases:
            raise KeyError(f"parameter {name!r} already registered")
        self._aliases[name] = target

    def resolve(self, name: str) -> str:
        name = self._aliases.get(name, name)
        if name not in self._values:
            raise KeyError(f"unknown parameter {name!r}")
        return name

    def value(self, name: str) -> np.ndarray:
        return self._values[self.resolve(name)]

    def grad(self, name: str) -> np.ndarray:
        return self._grads[self.resolve(name)]

    def set_value(self, name: str, value) -> None:
        dst = self.value(name)
        value = np.asarray(value, dtype=DTYPE)
        _check_same_shape(dst, value)
        dst[...] = value

    def zero_grads(self) -> None:
        for g in self._grads.values():
            g.fill(0.0)

    def names(self) -> list[str]:
        """Names of distinct slots (aliases excluded), in registration order."""
        return list(self._values)

    def items(self) -> Iterator[tuple[str, np.ndarray, np.ndarray]]:
        for name in self._values:
            yield name, self._values[name], self._grads[name]

    def n_params(self) -> int:
        return int(sum(v.size for v in self._values.values()))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self._values.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, value in state.items():
            self.set_value(name, value)

    def __contains__(self, name: str) -> bool:
        return name in self._values or name in self._aliases


@dataclass
class AdamState:
    lr: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(store: ParamStore, state: AdamState, frozen: frozenset[str] = frozenset()) -> None:
    """One bias-corrected Adam update in place. Gradients are left as they are."""
    for name, _, grad in store.items():
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    t = state.t
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, value, grad in store.items():
        m = state.m.setdefault(name, np.zeros_like(value))
        v = state.v.setdefault(name, np.zeros_like(value))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        if name in frozen:
            continue
        value -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    tolerance: float
    failures: list[tuple[str, tuple[int, ...], float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradients(
    loss_fn: Callable[[], float],
    store: ParamStore,
    tolerance: float = 1e-4,
    h: float = 1e-5,
    max_per_param: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare the gradients currently held in ``store`` against central differences.

    ``loss_fn`` is called with the store perturbed in place and must depend
    on nothing else. The analytic gradients must already be populated.
    With ``max_per_param`` set, a random subset of each parameter's
    elements is checked.
    """
    worst = 0.0
    checked = 0
    failures = []
    for name, value, grad in store.items():
        flat = value.reshape(-1)
        analytic_all = grad.reshape(-1).copy()
        idx = np.arange(flat.size)
        if max_per_param is not None and flat.size > max_per_param:
            rng = rng if rng is not None else make_rng(0)
            idx = np.sort(rng.choice(flat.size, size=max_per_param, replace=False))
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn()
            flat[i] = orig - h
            f_minus = loss_fn()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = relative_error(analytic_all[i], numeric, floor)
            checked += 1
            if not math.isfinite(err) or err > tolerance:
                failures.append((name, np.unravel_index(i, value.shape), float(analytic_all[i]), numeric))
            worst = max(worst, err) if math.isfinite(err) else math.inf
    return GradCheckReport(worst, checked, tolerance, failures)
