"""Binary MAD link prediction.

A pair ``(u, v)`` is scored from references that share one endpoint with
it. With ``u0`` varied and ``v`` kept::

    r(u, v | u0) = g_dst(v) . (f(u) - f(u0)) + w * mem[u0, v]

and symmetrically with ``v0`` varied, using ``g_src(u)``. Estimates from
both sides are pooled into one Softmin over their position distances.
Heads are independent instances whose logits are averaged.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass

import numpy as np

from .aggregator import Estimate, SentinelConfig, mean_forward, softmin_backward, softmin_forward
from .config import MadConfig, from_dict, to_dict
from .encoder import EncodingTable, HeadSet, init_tables, knn_batch
from .memory import AdjacencyMemory, MemoryAdaptor
from .numeric import ParamStore, l2_distance, make_rng

_CHUNK = 512


def estimate_via_u0(
    head: EncodingTable,
    memory: AdjacencyMemory,
    adaptor: MemoryAdaptor,
    u: int,
    v: int,
    u0: int,
    ablation: str = "mad",
) -> Estimate:
    if u0 == u:
        raise ValueError(f"reference u0={u0} equals the query source")
    delta = head.position(u) - head.position(u0)
    value = 0.0
    if ablation != "nograd":
        value += float(np.dot(head.grad_dst(v), delta))
    if ablation != "nomem":
        value += float(adaptor.adapt(memory.lookup(u0, v)))
    return Estimate(value, l2_distance(head.position(u), head.position(u0)))


def estimate_via_v0(
    head: EncodingTable,
    memory: AdjacencyMemory,
    adaptor: MemoryAdaptor,
    u: int,
    v: int,
    v0: int,
    ablation: str = "mad",
) -> Estimate:
    if v0 == v:
        raise ValueError(f"reference v0={v0} equals the query destination")
    delta = head.position(v) - head.position(v0)
    value = 0.0
    if ablation != "nograd":
        value += float(np.dot(head.grad_src(u), delta))
    if ablation != "nomem":
        value += float(adaptor.adapt(memory.lookup(u, v0)))
    return Estimate(value, l2_distance(head.position(v), head.position(v0)))


@dataclass
class References:
    """Reference node ids per head: ``u0`` and ``v0`` shaped ``(H, B, K)``.

    Id ``n_nodes`` denotes the pseudo node pinned at the origin.
    """

    u0: np.ndarray
    v0: np.ndarray


@dataclass
class _HeadCache:
    diff_u: np.ndarray
    diff_v: np.ndarray
    dist: np.ndarray
    mem: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    pred: np.ndarray


@dataclass
class ForwardCache:
    queries: np.ndarray
    refs: References
    heads: list[_HeadCache]
    head_logits: np.ndarray
    logits: np.ndarray
    uncertainty: np.ndarray


def sample_random(n_nodes: int, anchors: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` distinct uniform nodes per anchor, never the anchor itself."""
    if k > n_nodes - 1:
        raise ValueError(f"cannot draw {k} distinct references among {n_nodes - 1} candidates")
    anchors = np.asarray(anchors, dtype=np.int64)
    out = np.empty((len(anchors), k), dtype=np.int64)
    for start in range(0, len(anchors), _CHUNK):
        a = anchors[start : start + _CHUNK]
        keys = rng.random((len(a), n_nodes))
        keys[np.arange(len(a)), a] = np.inf
        out[start : start + len(a)] = np.argpartition(keys, k - 1, axis=1)[:, :k]
    return out


class LinkModel:
    def __init__(
        self,
        n_nodes: int,
        memory: AdjacencyMemory,
        config: MadConfig | None = None,
        directed: bool = False,
        rng: np.random.Generator | None = None,
    ):
        self.config = config if config is not None else MadConfig()
        if memory.n_nodes != n_nodes:
            raise ValueError(f"memory has {memory.n_nodes} nodes, model {n_nodes}")
        self.n_nodes = n_nodes
        self.memory = memory
        self.directed = directed
        shared = (not directed) if self.config.shared is None else self.config.shared
        rng = rng if rng is not None else make_rng(self.config.seed)
        self.store = ParamStore()
        self.heads: HeadSet = init_tables(n_nodes, self.config.dim, self.config.heads, shared, rng, self.store)
        self.adaptor = MemoryAdaptor(self.config.adaptor_init)
        self.adaptor.register(self.store)

    @property
    def shared(self) -> bool:
        return self.heads[0].shared

    @property
    def sentinels(self) -> SentinelConfig:
        if self.config.aggregator == "sentinel":
            return SentinelConfig(self.config.n_sentinels, self.config.sentinel_distance)
        return SentinelConfig(0)

    @property
    def ablation(self) -> str:
        return self.config.ablation

    # reference selection

    def sample_references(self, queries, rng: np.random.Generator | None = None, mode: str | None = None) -> References:
        q = np.asarray(queries, dtype=np.int64).reshape(-1, 2)
        mode = mode or self.config.eval_mode
        k = self.config.k_refs
        n_heads = len(self.heads)
        use_u = self.config.directions in ("both", "u0")
        use_v = self.config.directions in ("both", "v0")
        if mode == "origin":
            pseudo = np.full((n_heads, len(q), 1), self.n_nodes, dtype=np.int64)
            empty = np.empty((n_heads, len(q), 0), dtype=np.int64)
            return References(pseudo if use_u else empty, pseudo if use_v else empty)
        if self.n_nodes <= k:
            raise ValueError(f"need more than K={k} nodes, have {self.n_nodes}")
        u0 = np.empty((n_heads, len(q), k if use_u else 0), dtype=np.int64)
        v0 = np.empty((n_heads, len(q), k if use_v else 0), dtype=np.int64)
        for h, head in enumerate(self.heads):
            if mode == "random":
                if rng is None:
                    raise ValueError("random reference mode needs an rng")
                if use_u:
                    u0[h] = sample_random(self.n_nodes, q[:, 0], k, rng)
                if use_v:
                    v0[h] = sample_random(self.n_nodes, q[:, 1], k, rng)
            elif mode == "dynamic":
                anchors, inverse = np.unique(q, return_inverse=True)
                nearest = knn_batch(head.positions, anchors, k)[inverse.reshape(q.shape)]
                if use_u:
                    u0[h] = nearest[:, 0]
                if use_v:
                    v0[h] = nearest[:, 1]
            else:
                raise ValueError(f"unknown reference mode {mode!r}")
        return References(u0, v0)

    # forward / backward

    def _mem_lookup(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        n = self.n_nodes
        rows_c = np.minimum(rows, n - 1)
        cols_c = np.minimum(cols, n - 1)
        r = self.memory.mem[rows_c, cols_c].astype(np.float64)
        r[(rows == n) | (cols == n)] = 0.0
        return r

    def forward(self, queries, refs: References) -> ForwardCache:
        q = np.asarray(queries, dtype=np.int64).reshape(-1, 2)
        u, v = q[:, 0], q[:, 1]
        if np.any(refs.u0 == u[None, :, None]) or np.any(refs.v0 == v[None, :, None]):
            raise ValueError("a reference coincides with its own query node")
        w = self.adaptor.weight[0]
        use_grad = self.ablation != "nograd"
        use_mem = self.ablation != "nomem"
        caches = []
        head_logits = np.empty((len(self.heads), len(q)))
        head_unc = np.empty((len(self.heads), len(q)))
        for h, head in enumerate(self.heads):
            pos = np.vstack([head.positions, np.zeros((1, head.dim))])
            u0, v0 = refs.u0[h], refs.v0[h]
            diff_u = pos[u][:, None, :] - pos[u0]
            diff_v = pos[v][:, None, :] - pos[v0]
            mem = np.concatenate([self._mem_lookup(u0, v[:, None]), self._mem_lookup(u[:, None], v0)], axis=1)
            values = np.zeros(mem.shape)
            if use_grad:
                values[:, : u0.shape[1]] += np.sum(head.grads_dst[v][:, None, :] * diff_u, axis=-1)
                values[:, u0.shape[1] :] += np.sum(head.grads_src[u][:, None, :] * diff_v, axis=-1)
            if use_mem:
                values += w * mem
            diff = np.concatenate([diff_u, diff_v], axis=1)
            dist = np.sqrt(np.sum(diff * diff, axis=-1))
            if self.config.aggregator == "mean":
                pred, weights, unc = mean_forward(values)
            else:
                s = self.sentinels
                pred, weights, unc = softmin_forward(values, dist, s.mass, s.value)
            if not np.all(np.isfinite(pred)):
                bad = int(np.flatnonzero(~np.isfinite(pred))[0])
                raise FloatingPointError(f"non-finite logit for pair {tuple(q[bad])} in head {h}")
            head_logits[h] = pred
            head_unc[h] = unc
            caches.append(_HeadCache(diff_u, diff_v, dist, mem, values, weights, pred))
        return ForwardCache(q, refs, caches, head_logits, head_logits.mean(axis=0), head_unc.mean(axis=0))

    def backward(self, cache: ForwardCache, d_logits: np.ndarray, freeze_weights: bool = False) -> None:
        """Accumulate ``d loss / d params`` into ``self.store`` given ``d loss / d logits``."""
        d_logits = np.asarray(d_logits, dtype=np.float64)
        if not np.all(np.isfinite(d_logits)):
            bad = int(np.flatnonzero(~np.isfinite(d_logits))[0])
            raise FloatingPointError(f"non-finite upstream gradient at batch element {bad}")
        u, v = cache.queries[:, 0], cache.queries[:, 1]
        n_heads = len(self.heads)
        use_grad = self.ablation != "nograd"
        use_mem = self.ablation != "nomem"
        d_w = 0.0
        for h, (head, hc) in enumerate(zip(self.heads, cache.heads)):
            p = head.prefix
            g_pos = self.store.grad(p + "pos")
            g_dst = self.store.grad(p + "g_dst")
            g_src = self.store.grad(p + "g_src")
            d_pred = d_logits / n_heads
            if self.config.aggregator == "mean":
                d_values = d_pred[:, None] * hc.weights
                d_dist = np.zeros_like(hc.values)
            else:
                d_values, d_dist = softmin_backward(d_pred, hc.values, hc.weights, hc.pred, freeze_weights)
            if use_mem:
                d_w += float(np.sum(d_values * hc.mem))
            ku = hc.diff_u.shape[1]
            diff = np.concatenate([hc.diff_u, hc.diff_v], axis=1)
            safe = np.where(hc.dist > 0, hc.dist, 1.0)
            d_diff = np.where(hc.dist > 0, d_dist / safe, 0.0)[..., None] * diff
            if use_grad:
                gv = head.grads_dst[v]
                gu = head.grads_src[u]
                np.add.at(g_dst, v, np.einsum("bk,bkd->bd", d_values[:, :ku], hc.diff_u))
                np.add.at(g_src, u, np.einsum("bk,bkd->bd", d_values[:, ku:], hc.diff_v))
                d_diff[:, :ku] += d_values[:, :ku, None] * gv[:, None, :]
                d_diff[:, ku:] += d_values[:, ku:, None] * gu[:, None, :]
            d_pos = np.zeros((self.n_nodes + 1, head.dim))
            np.add.at(d_pos, u, d_diff[:, :ku].sum(axis=1))
            np.add.at(d_pos, v, d_diff[:, ku:].sum(axis=1))
            refs = np.concatenate([cache.refs.u0[h], cache.refs.v0[h]], axis=1)
            np.add.at(d_pos, refs.reshape(-1), -d_diff.reshape(-1, head.dim))
            g_pos += d_pos[: self.n_nodes]
        self.store.grad("adaptor.w")[0] += d_w

    # scoring

    def score_batch(self, queries, rng: np.random.Generator | None = None, mode: str | None = None):
        """Logits and uncertainties for many pairs; returns two arrays."""
        q = np.asarray(queries, dtype=np.int64).reshape(-1, 2)
        logits = np.empty(len(q))
        unc = np.empty(len(q))
        for start in range(0, len(q), 4096):
            chunk = q[start : start + 4096]
            cache = self.forward(chunk, self.sample_references(chunk, rng, mode))
            logits[start : start + len(chunk)] = cache.logits
            unc[start : start + len(chunk)] = cache.uncertainty
        return logits, unc

    def score_pair(self, u: int, v: int, rng: np.random.Generator | None = None, mode: str | None = None) -> tuple[float, float]:
        logits, unc = self.score_batch([(u, v)], rng, mode)
        return float(logits[0]), float(unc[0])

    # persistence

    def save(self, path) -> None:
        buf = io.BytesIO()
        state = {f"param::{k}": v for k, v in self.store.state_dict().items()}
        np.savez(
            buf,
            config=np.array(json.dumps(to_dict(self.config))),
            meta=np.array(json.dumps({"n_nodes": self.n_nodes, "directed": self.directed, "shared": self.shared})),
            memory=self.memory.mem,
            **state,
        )
        with open(path, "wb") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def load(cls, path) -> LinkModel:
        try:
            return cls._load(path)
        except (EOFError, KeyError, zipfile.BadZipFile, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: not a saved model ({exc})") from None

    @classmethod
    def _load(cls, path) -> LinkModel:
        with np.load(path, allow_pickle=False) as data:
            config = from_dict(MadConfig, json.loads(str(data["config"])))
            meta = json.loads(str(data["meta"]))
            config.shared = meta["shared"]
            memory = AdjacencyMemory(meta["n_nodes"], np.empty((0, 2)), meta["directed"])
            memory.mem[...] = data["memory"]
            model = cls(meta["n_nodes"], memory, config, meta["directed"])
            for key in data.files:
                if key.startswith("param::"):
                    model.store.set_value(key[len("param::") :], data[key])
        return model


def params_count(model: LinkModel) -> int:
    return model.store.n_params()
