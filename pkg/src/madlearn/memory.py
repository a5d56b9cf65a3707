"""Graphs and the dense adjacency memory of known relations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Graph:
    """Edge list over nodes ``0..n_nodes-1``.

    Undirected edges are kept once, as ``(min, max)``.
    """

    n_nodes: int
    edges: np.ndarray
    directed: bool = False
    labels: np.ndarray | None = None
    n_duplicates: int = field(default=0, compare=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= self.n_nodes):
            raise ValueError(f"edge endpoint outside [0, {self.n_nodes})")
        if not self.directed:
            edges = np.sort(edges, axis=1)
        uniq, first = np.unique(edges, axis=0, return_index=True)
        self.n_duplicates += len(edges) - len(uniq)
        # keep first-seen order so loaders stay faithful to the file
        self.edges = edges[np.sort(first)] if len(edges) else edges

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def has_edge(self, u: int, v: int) -> bool:
        if not self.directed and u > v:
            u, v = v, u
        return (u, v) in self.edge_set()

    def subgraph(self, edges) -> Graph:
        return Graph(self.n_nodes, edges, self.directed, self.labels)


class AdjacencyMemory:
    """Dense byte matrix; ``mem[u, v] == 1`` iff ``(u, v)`` is a memorized edge."""

    def __init__(self, n_nodes: int, edges, directed: bool = False):
        self.n_nodes = int(n_nodes)
        self.directed = directed
        self.mem = np.zeros((self.n_nodes, self.n_nodes), dtype=np.uint8)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= self.n_nodes):
            raise ValueError(f"edge endpoint outside [0, {self.n_nodes})")
        self.mem[edges[:, 0], edges[:, 1]] = 1
        if not directed:
            self.mem[edges[:, 1], edges[:, 0]] = 1
        self._masked: dict[tuple[int, int], tuple[int, int]] = {}

    @classmethod
    def from_graph(cls, graph: Graph) -> AdjacencyMemory:
        return cls(graph.n_nodes, graph.edges, graph.directed)

    def _check(self, u: int, v: int) -> None:
        if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
            raise IndexError(f"node pair ({u}, {v}) out of range for {self.n_nodes} nodes")

    def lookup(self, u: int, v: int) -> int:
        self._check(u, v)
        return int(self.mem[u, v])

    def mask_pair(self, u: int, v: int) -> None:
        self._check(u, v)
        key = (u, v) if self.directed else (min(u, v), max(u, v))
        if key in self._masked:
            return
        self._masked[key] = (int(self.mem[u, v]), int(self.mem[v, u]))
        self.mem[u, v] = 0
        if not self.directed:
            self.mem[v, u] = 0

    def unmask_pair(self, u: int, v: int) -> None:
        self._check(u, v)
        key = (u, v) if self.directed else (min(u, v), max(u, v))
        if key not in self._masked:
            raise KeyError(f"pair ({u}, {v}) was not masked")
        uv, vu = self._masked.pop(key)
        self.mem[u, v] = uv
        if not self.directed:
            self.mem[v, u] = vu

    def total(self) -> int:
        return int(self.mem.sum(dtype=np.int64))


class MemoryAdaptor:
    """Learnable scalar gain on memorized relations: ``m(r0) = w * r0``.

    The weight is a one-element array so it can live inside a ParamStore.
    """

    def __init__(self, w: float = 1.0):
        self.weight = np.array([w], dtype=np.float64)

    @property
    def w(self) -> float:
        return float(self.weight[0])

    @w.setter
    def w(self, value: float) -> None:
        self.weight[0] = value

    def register(self, store, name: str = "adaptor.w") -> None:
        store.add(name, self.weight)
        self.weight = store.value(name)

    def adapt(self, r0):
        return self.weight[0] * r0


def adapt(adaptor: MemoryAdaptor, r0):
    return adaptor.adapt(r0)
