import numpy as np
import pytest

from madlearn.config import MadConfig
from madlearn.data import generate_sbm
from madlearn.link import LinkModel
from madlearn.memory import AdjacencyMemory
from madlearn.numeric import make_rng

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record an acceptance verdict; printed in the terminal summary."""

    def record(cid, text, passed, detail=""):
        _CRITERIA.append((cid, text, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid, text, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] C{cid:<2} {text}  {detail}")


@pytest.fixture
def rng():
    return make_rng(12345)


def random_link_model(n=10, dim=4, seed=0, scale=3.0, **overrides):
    """Small model with enlarged parameters so every term of the loss is non-trivial."""
    graph = generate_sbm(n, 2, 0.6, 0.2, make_rng(seed + 100))
    cfg = MadConfig(dim=dim, heads=overrides.pop("heads", 1), seed=seed, **overrides)
    model = LinkModel(n, AdjacencyMemory.from_graph(graph), cfg, graph.directed)
    for _, value, _ in model.store.items():
        value *= scale
    model.adaptor.w = 1.3
    return model, graph


@pytest.fixture
def small_model():
    return random_link_model(k_refs=3)
