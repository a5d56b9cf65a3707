import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from madlearn.aggregator import (
    Estimate,
    SentinelConfig,
    aggregate_mean,
    aggregate_softmin,
    softmin_backward,
    softmin_forward,
    softmin_weights,
)

distances = st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=20)
values = st.floats(-10, 10, allow_nan=False)


@pytest.mark.parametrize("vals, expected", [([2, 4], 3.0), ([7.5], 7.5), ([1, 2, 3, 4], 2.5)])
def test_aggregate_mean(vals, expected):
    assert aggregate_mean([Estimate(v, 9.0) for v in vals]) == expected


def test_aggregate_mean_empty():
    with pytest.raises(ValueError):
        aggregate_mean([])


def test_softmin_weights_examples():
    w, s = softmin_weights([0.0, 0.0])
    assert w == [0.5, 0.5] and s == 0.0
    w, s = softmin_weights([1.0], SentinelConfig(1, 1.0))
    assert w == [0.5] and s == 0.5
    w, _ = softmin_weights([0.0, math.log(3)])
    assert w == pytest.approx([0.75, 0.25], abs=1e-15)


def test_softmin_weights_errors():
    with pytest.raises(ValueError):
        softmin_weights([], SentinelConfig(0))
    with pytest.raises(ValueError):
        softmin_weights([-1.0])


def test_aggregate_softmin_examples():
    assert aggregate_softmin([Estimate(4.0, 0.0)]) == (4.0, 0.0)
    assert aggregate_softmin([], SentinelConfig(8, 1.0)) == (0.0, 1.0)
    assert aggregate_softmin([Estimate(2.0, 1.0)], SentinelConfig(1, 1.0)) == (1.0, 0.5)


@given(distances, st.sampled_from([0, 1, 8]), st.floats(0, 5))
def test_weights_form_a_distribution(d, k, s):
    w, sw = softmin_weights(d, SentinelConfig(k, s))
    assert all(0 <= x <= 1 for x in w) and 0 <= sw <= 1
    assert abs(sum(w) + sw - 1) <= 1e-12


@given(distances, st.floats(0.1, 10))
def test_translation_invariance_without_sentinels(d, c):
    w1, _ = softmin_weights(d)
    w2, _ = softmin_weights([x + c for x in d])
    assert np.allclose(w1, w2, atol=1e-12)


@given(st.lists(st.floats(0, 20), min_size=1, max_size=10), st.floats(0.01, 5))
def test_uncertainty_grows_with_distance(d, c):
    cfg = SentinelConfig(8, 1.0)
    _, s1 = softmin_weights(d, cfg)
    _, s2 = softmin_weights([x + c for x in d], cfg)
    assert s2 >= s1
    if s1 < 1 - 1e-9:
        assert s2 > s1


def test_sentinel_suppression_limits():
    cfg = SentinelConfig(8, 1.0)
    far, _ = aggregate_softmin([Estimate(5.0, 200.0), Estimate(-3.0, 300.0)], cfg)
    assert abs(far) < 1e-12
    near, _ = aggregate_softmin([Estimate(5.0, 0.0)], SentinelConfig(0))
    assert near == 5.0


@given(st.lists(values, min_size=1, max_size=10), st.floats(0, 10))
def test_equal_distance_softmin_equals_mean(vals, d):
    est = [Estimate(v, d) for v in vals]
    pred, unc = aggregate_softmin(est)
    assert pred == pytest.approx(aggregate_mean(est), abs=1e-12)
    assert unc == 0.0


def test_batched_forward_matches_scalar():
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(5, 6))
    dists = rng.uniform(0, 3, size=(5, 6))
    cfg = SentinelConfig(8, 1.0)
    pred, _, sw = softmin_forward(vals, dists, cfg.mass)
    for b in range(5):
        p, u = aggregate_softmin([Estimate(v, d) for v, d in zip(vals[b], dists[b])], cfg)
        assert pred[b] == pytest.approx(p, abs=1e-14)
        assert sw[b] == pytest.approx(u, abs=1e-14)


def test_softmin_backward_matches_finite_differences():
    rng = np.random.default_rng(1)
    vals = rng.normal(size=6)
    dists = rng.uniform(0, 3, size=6)
    mass = SentinelConfig(8, 1.0).mass
    pred, w, _ = softmin_forward(vals, dists, mass)
    d_vals, d_dists = softmin_backward(np.array(1.0), vals, w, pred)
    h = 1e-6
    for i in range(6):
        e = np.zeros(6)
        e[i] = h
        fd_v = (softmin_forward(vals + e, dists, mass)[0] - softmin_forward(vals - e, dists, mass)[0]) / (2 * h)
        fd_d = (softmin_forward(vals, dists + e, mass)[0] - softmin_forward(vals, dists - e, mass)[0]) / (2 * h)
        assert d_vals[i] == pytest.approx(fd_v, abs=1e-8)
        assert d_dists[i] == pytest.approx(fd_d, abs=1e-8)
