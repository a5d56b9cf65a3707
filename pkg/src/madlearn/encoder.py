"""Per-node position and differential-function tables, and brute-force k-NN
in position space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import ParamStore

_CHUNK = 256


@dataclass
class EncodingTable:
    """One head's tables. Arrays are views into the owning ParamStore."""

    positions: np.ndarray
    grads_dst: np.ndarray
    grads_src: np.ndarray
    shared: bool
    prefix: str = ""

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def _check(self, node: int) -> None:
        if not 0 <= node < self.n_nodes:
            raise IndexError(f"node {node} out of range for {self.n_nodes} nodes")

    def position(self, node: int) -> np.ndarray:
        self._check(node)
        return self.positions[node]

    def grad_dst(self, node: int) -> np.ndarray:
        self._check(node)
        return self.grads_dst[node]

    def grad_src(self, node: int) -> np.ndarray:
        self._check(node)
        return self.grads_src[node]


@dataclass
class HeadSet:
    heads: list[EncodingTable]
    store: ParamStore

    def __len__(self) -> int:
        return len(self.heads)

    def __getitem__(self, i: int) -> EncodingTable:
        return self.heads[i]

    def __iter__(self):
        return iter(self.heads)


def init_tables(
    n_nodes: int,
    dim: int,
    n_heads: int,
    shared: bool,
    rng: np.random.Generator,
    store: ParamStore | None = None,
) -> HeadSet:
    """Uniform init in ``[-0.5/sqrt(d), 0.5/sqrt(d)]``, registered as
    ``head{h}.pos``, ``head{h}.g_dst`` and ``head{h}.g_src`` (an alias of
    ``g_dst`` when shared)."""
    if n_nodes < 1 or dim < 1 or n_heads < 1:
        raise ValueError(f"table sizes must be positive, got n={n_nodes} d={dim} H={n_heads}")
    store = store if store is not None else ParamStore()
    bound = 0.5 / np.sqrt(dim)
    heads = []
    for h in range(n_heads):
        p = f"head{h}."
        pos = store.add(p + "pos", rng.uniform(-bound, bound, (n_nodes, dim)))
        g_dst = store.add(p + "g_dst", rng.uniform(-bound, bound, (n_nodes, dim)))
        if shared:
            store.alias(p + "g_src", p + "g_dst")
            g_src = g_dst
        else:
            g_src = store.add(p + "g_src", rng.uniform(-bound, bound, (n_nodes, dim)))
        heads.append(EncodingTable(pos, g_dst, g_src, shared, p))
    return HeadSet(heads, store)


def count_params(n_nodes: int, dim: int, n_heads: int, shared: bool, adaptor: bool = True) -> int:
    return n_heads * n_nodes * dim * (2 if shared else 3) + int(adaptor)


def knn_batch(positions: np.ndarray, queries: np.ndarray, k: int, exclude_self: bool = True) -> np.ndarray:
    """K nearest nodes to each query node, nearest first, ties to the smaller id.

    Returns an int array of shape ``(len(queries), k)``.
    """
    positions = np.asarray(positions)
    queries = np.asarray(queries, dtype=np.int64)
    n = positions.shape[0]
    if k < 1 or k > n - int(exclude_self):
        raise ValueError(f"cannot pick {k} neighbours among {n} nodes")
    out = np.empty((len(queries), k), dtype=np.int64)
    for start in range(0, len(queries), _CHUNK):
        q = queries[start : start + _CHUNK]
        diff = positions[q][:, None, :] - positions[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        if exclude_self:
            dist[np.arange(len(q)), q] = np.inf
        out[start : start + len(q)] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return out


def knn_positions(table: EncodingTable | np.ndarray, query_node: int, k: int, exclude=()) -> list[int]:
    """The ``k`` nodes closest to ``query_node`` in position space, skipping ``exclude``."""
    positions = table.positions if isinstance(table, EncodingTable) else np.asarray(table)
    n = positions.shape[0]
    if not 0 <= query_node < n:
        raise IndexError(f"node {query_node} out of range for {n} nodes")
    excluded = {int(e) for e in exclude}
    if k < 1 or k > n - len(excluded & set(range(n))):
        raise ValueError(f"cannot pick {k} neighbours: {n} nodes, {len(excluded)} excluded")
    diff = positions - positions[query_node]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    if excluded:
        dist[list(excluded)] = np.inf
    return [int(i) for i in np.argsort(dist, kind="stable")[:k]]
