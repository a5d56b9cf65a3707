import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from madlearn.config import MadConfig, TrainConfig
from madlearn.data import karate, make_link_dataset
from madlearn.link import LinkModel
from madlearn.memory import AdjacencyMemory, Graph
from madlearn.numeric import AdamState, make_rng
from madlearn.trainer import fit, loss, loss_grad, sample_negatives, sigmoid, train_step

from conftest import random_link_model


def test_loss_at_zero_logits():
    assert loss([0.0], [0.0]) == pytest.approx(2 * math.log(2), abs=1e-15)
    assert loss([0.0], [0.0]) == pytest.approx(1.3862943611198906, abs=1e-15)


def test_loss_is_finite_at_extremes():
    value = loss([-1e4], [1e4])
    assert math.isfinite(value)
    assert value == pytest.approx(-2 * math.log(1e-12), rel=1e-9)
    assert np.all(loss_grad(np.array([-1e4, 1e4]), np.array([1.0, 0.0])) == 0.0)


@given(st.floats(-30, 30), st.sampled_from([0.0, 1.0]))
def test_loss_grad_matches_finite_difference(z, y):
    h = 1e-6

    def f(t):
        return loss([t], []) if y == 1 else loss([], [t])

    fd = (f(z + h) - f(z - h)) / (2 * h)
    assert loss_grad(np.array([z]), np.array([y]))[0] == pytest.approx(fd, abs=1e-6)


@given(st.floats(-700, 700))
def test_sigmoid_stable(x):
    s = sigmoid(np.array([x]))[0]
    assert 0 <= s <= 1
    assert s == pytest.approx(1 / (1 + math.exp(-x)) if x > -700 else 0.0, abs=1e-15)


def test_negatives_are_non_edges():
    graph = karate()
    edges = graph.edge_set()
    neg = sample_negatives(graph, 300, make_rng(0))
    assert len(neg) == 300
    keys = {(min(u, v), max(u, v)) for u, v in neg.tolist()}
    assert len(keys) == 300
    assert not keys & edges
    assert np.all(neg[:, 0] != neg[:, 1])


def test_negatives_fail_when_graph_is_complete():
    graph = Graph(4, [(u, v) for u in range(4) for v in range(u + 1, 4)])
    with pytest.raises(RuntimeError):
        sample_negatives(graph, 1, make_rng(0), max_rounds=5)


def test_negatives_deterministic():
    graph = karate()
    assert np.array_equal(sample_negatives(graph, 50, make_rng(3)), sample_negatives(graph, 50, make_rng(3)))


def test_one_step_lowers_loss_on_same_batch():
    model, graph = random_link_model(n=10, scale=1.0, k_refs=3)
    adam = AdamState(lr=0.005)
    rng = make_rng(0)
    pos = graph.edges
    first = train_step(model, graph, pos, adam, make_rng(1))
    again = train_step(model, graph, pos, adam, make_rng(1))
    assert again < first
    assert adam.t == 2
    del rng


def test_fit_zero_epochs():
    model, graph = random_link_model()
    before = model.store.state_dict()
    assert fit(model, graph, TrainConfig(epochs=0)) == []
    after = model.store.state_dict()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_fit_is_deterministic():
    ds = make_link_dataset(karate(), seed=0)

    def run():
        model = LinkModel(34, AdjacencyMemory.from_graph(ds.train), MadConfig(dim=4))
        reports = fit(model, ds.train, TrainConfig(epochs=6, eval_every=3, hits_k=10), ds.splits)
        return [r.to_dict() for r in reports]

    a, b = run(), run()
    assert a == b
    assert [r["hits"] != {} for r in a] == [False, False, True, False, False, True]


def test_fit_reduces_training_loss():
    ds = make_link_dataset(karate(), seed=1)
    model = LinkModel(34, AdjacencyMemory.from_graph(ds.train), MadConfig(dim=8))
    reports = fit(model, ds.train, TrainConfig(epochs=60, batch_size=32, eval_every=60, hits_k=10), ds.splits)
    assert reports[-1].loss < reports[0].loss
    assert reports[-1].train_hits is not None


def test_fit_callback_sees_every_epoch():
    model, graph = random_link_model(k_refs=3)
    seen = []
    fit(model, graph, TrainConfig(epochs=4), callback=seen.append)
    assert [r.epoch for r in seen] == [1, 2, 3, 4]
