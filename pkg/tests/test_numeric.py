import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from madlearn.numeric import AdamState, ParamStore, adam_step, check_gradients, dot, l2_distance, make_rng

finite = st.floats(-1e3, 1e3, allow_nan=False)
vec3 = st.lists(finite, min_size=3, max_size=3)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ([1, 0], [0, 1], 0.0),
        ([2, 3], [2, 3], 13.0),
        ([0.3, -2.0, 7.0], [0, 0, 0], 0.0),
    ],
)
def test_dot(a, b, expected):
    assert dot(a, b) == expected


def test_dot_shape_mismatch_names_shapes():
    with pytest.raises(ValueError, match=r"\(2,\).*\(3,\)"):
        dot([1, 2], [1, 2, 3])


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ([0.5, -1.5], [0.5, -1.5], 0.0),
        ([0, 0], [3, 4], 5.0),
        ([1], [0], 1.0),
    ],
)
def test_l2_distance(a, b, expected):
    assert l2_distance(a, b) == expected


def test_l2_distance_shape_mismatch():
    with pytest.raises(ValueError):
        l2_distance([1.0], [1.0, 2.0])


@given(vec3, vec3, vec3)
def test_l2_is_a_metric(a, b, c):
    ab, ba = l2_distance(a, b), l2_distance(b, a)
    assert ab == ba
    assert ab >= 0
    assert (ab == 0) == (a == b)
    assert l2_distance(a, c) <= ab + l2_distance(b, c) + 1e-9 * (1 + ab)


def test_param_store_alias_shares_slot():
    store = ParamStore()
    store.add("a", np.zeros(3))
    store.alias("b", "a")
    store.grad("b")[:] = 1.0
    assert np.all(store.grad("a") == 1.0)
    assert store.names() == ["a"]
    assert store.n_params() == 3
    store.zero_grads()
    assert np.all(store.grad("a") == 0.0)


def test_param_store_rejects_duplicates_and_unknown():
    store = ParamStore()
    store.add("a", [1.0])
    with pytest.raises(KeyError):
        store.add("a", [2.0])
    with pytest.raises(KeyError):
        store.value("nope")


def test_adam_first_step_closed_form():
    # first step: m_hat = g and v_hat = g^2, so the move is lr * g / (|g| + eps)
    store = ParamStore()
    store.add("p", [0.0])
    store.grad("p")[0] = 1.0
    state = AdamState(lr=0.005)
    adam_step(store, state)
    assert state.t == 1
    assert abs(store.value("p")[0] - (-0.005)) < 1e-6
    assert store.grad("p")[0] == 1.0


@settings(max_examples=25)
@given(st.integers(1, 20), st.lists(finite, min_size=1, max_size=5))
def test_adam_zero_gradient_is_noop(steps, init):
    store = ParamStore()
    store.add("p", init)
    before = store.value("p").copy()
    state = AdamState()
    for _ in range(steps):
        adam_step(store, state)
    assert state.t == steps
    assert np.array_equal(store.value("p"), before)


def test_adam_rejects_non_finite_gradient():
    store = ParamStore()
    store.add("weights", [1.0, 2.0])
    store.grad("weights")[1] = np.nan
    with pytest.raises(FloatingPointError, match="weights"):
        adam_step(store, AdamState())


def test_adam_runs_are_bit_identical():
    def run():
        rng = make_rng(3)
        store = ParamStore()
        store.add("p", rng.normal(size=4))
        state = AdamState()
        for _ in range(50):
            store.grad("p")[:] = rng.normal(size=4)
            adam_step(store, state)
        return store.value("p")

    assert np.array_equal(run(), run())


def test_rng_determinism():
    assert np.array_equal(make_rng(9).random(10), make_rng(9).random(10))
    assert not np.array_equal(make_rng(9).random(10), make_rng(10).random(10))


def test_check_gradients_quadratic():
    store = ParamStore()
    p = store.add("p", [3.0])
    store.grad("p")[0] = 2 * p[0]
    report = check_gradients(lambda: float(p[0] ** 2), store, tolerance=1e-6)
    assert report.passed
    assert report.n_checked == 1
    assert abs(store.grad("p")[0] - 6.0) < 1e-6


def test_check_gradients_constant_loss():
    store = ParamStore()
    store.add("p", [1.0, -2.0])
    report = check_gradients(lambda: 4.2, store)
    assert report.passed and report.max_rel_error == 0.0


def test_check_gradients_reports_wrong_gradient():
    store = ParamStore()
    p = store.add("p", [1.5, 0.5])
    store.grad("p")[:] = [3.0, 0.0]  # second element wrong
    report = check_gradients(lambda: float(np.sum(p**2)), store)
    assert not report.passed
    assert [f[1] for f in report.failures] == [(1,)]


def test_check_gradients_subsample():
    store = ParamStore()
    p = store.add("p", np.linspace(-1, 1, 50))
    store.grad("p")[:] = np.cos(p)
    report = check_gradients(lambda: float(np.sum(np.sin(p))), store, max_per_param=7, rng=make_rng(0))
    assert report.n_checked == 7
    assert report.passed
    assert math.isfinite(report.max_rel_error)
