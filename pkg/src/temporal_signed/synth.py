"""Seeded temporal signed Watts-Strogatz and Barabasi-Albert generators.

Both generators keep the node set fixed. Snapshot 0 is the classic static
model; each later snapshot applies, in order: edge persistence, sign flips
on surviving edges, and new-edge formation. Every random draw comes from a
single ``numpy.random.Generator`` seeded from the config, so output is
bit-for-bit reproducible.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError
from .graph import TemporalSignedGraph, snapshot_from_arrays


def _check_prob(name, p):
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {p}")


@dataclass(frozen=True)
class WsConfig:
    n: int = 300
    half_k: int = 3
    rewire_p: float = 0.1
    T: int = 6
    sign_flip_p: float = 0.02
    persist_triangle: float = 0.95
    persist_other: float = 0.80
    new_edge_rate: float = 0.05
    pos_fraction: float = 0.90
    triad_fraction: float = 0.70
    seed: int = 0

    def __post_init__(self):
        for name in ("rewire_p", "sign_flip_p", "persist_triangle", "persist_other",
                     "pos_fraction", "triad_fraction"):
            _check_prob(name, getattr(self, name))
        if self.half_k < 1 or self.n <= 2 * self.half_k:
            raise ConfigError(f"need n > 2*half_k with half_k >= 1, got n={self.n}, half_k={self.half_k}")
        if self.T < 2:
            raise ConfigError(f"T must be >= 2, got {self.T}")
        if self.new_edge_rate < 0:
            raise ConfigError(f"new_edge_rate must be >= 0, got {self.new_edge_rate}")


@dataclass(frozen=True)
class BaConfig:
    n: int = 300
    m_attach: int = 3
    T: int = 6
    sign_flip_p: float = 0.02
    persist_hub: float = 0.98
    persist_other: float = 0.90
    hub_degree_quantile: float = 0.90
    pos_fraction: float = 0.90
    hub_pos_fraction: float = 0.95
    prune_low_degree_p: float = 0.02
    new_edge_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("sign_flip_p", "persist_hub", "persist_other", "hub_degree_quantile",
                     "pos_fraction", "hub_pos_fraction", "prune_low_degree_p"):
            _check_prob(name, getattr(self, name))
        if self.m_attach < 1:
            raise ConfigError(f"m_attach must be >= 1, got {self.m_attach}")
        if self.n <= self.m_attach:
            raise ConfigError(f"need n > m_attach, got n={self.n}, m_attach={self.m_attach}")
        if self.T < 2:
            raise ConfigError(f"T must be >= 2, got {self.T}")
        if self.new_edge_rate < 0:
            raise ConfigError(f"new_edge_rate must be >= 0, got {self.new_edge_rate}")


class _EdgeState:
    """Mutable undirected signed edge set with sorted, deterministic iteration."""

    def __init__(self, n):
        self.n = n
        self.sign: dict[tuple[int, int], int] = {}
        self.adj: list[set] = [set() for _ in range(n)]

    def has(self, u, v):
        return v in self.adj[u]

    def add(self, u, v, s):
        key = (u, v) if u < v else (v, u)
        self.sign[key] = s
        self.adj[u].add(v)
        self.adj[v].add(u)

    def remove(self, key):
        u, v = key
        del self.sign[key]
        self.adj[u].discard(v)
        self.adj[v].discard(u)

    def sorted_edges(self):
        return sorted(self.sign)

    def degrees(self):
        return np.array([len(a) for a in self.adj], dtype=np.int64)

    def csr(self):
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        rows = [sorted(a) for a in self.adj]
        indptr[1:] = np.cumsum([len(r) for r in rows])
        indices = np.fromiter((v for r in rows for v in r), dtype=np.int64, count=int(indptr[-1]))
        return indptr, indices

    def snapshot(self):
        keys = self.sorted_edges()
        if keys:
            arr = np.array(keys, dtype=np.int64)
            signs = np.array([self.sign[k] for k in keys], dtype=np.int8)
        else:
            arr = np.zeros((0, 2), dtype=np.int64)
            signs = np.zeros(0, dtype=np.int8)
        return snapshot_from_arrays(self.n, arr[:, 0], arr[:, 1], signs, directed=False)


def _draw_sign(rng, pos_fraction):
    return 1 if rng.random() < pos_fraction else -1


def _flip_signs(state, rng, p, stats):
    keys = state.sorted_edges()
    flips = rng.random(len(keys)) < p
    for key, f in zip(keys, flips):
        if f:
            state.sign[key] = -state.sign[key]
    stats["flipped"] = int(flips.sum())


def _add_random_edge(state, rng, sign_fn, max_tries=1000):
    n = state.n
    for _ in range(max_tries):
        u, v = int(rng.integers(n)), int(rng.integers(n))
        if u != v and not state.has(u, v):
            state.add(u, v, sign_fn(u, v))
            return True
    return False


# ---------------------------------------------------------------------------
# Watts-Strogatz
# ---------------------------------------------------------------------------

def _ws_initial(cfg: WsConfig, rng) -> _EdgeState:
    n, k = cfg.n, cfg.half_k
    state = _EdgeState(n)
    for j in range(1, k + 1):
        for u in range(n):
            state.add(u, (u + j) % n, 0)
    # rewiring pass in the classic order: by ring distance, then by node
    for j in range(1, k + 1):
        for u in range(n):
            v = (u + j) % n
            if rng.random() < cfg.rewire_p:
                candidates = n - 1 - len(state.adj[u])
                if candidates <= 0:
                    continue
                while True:
                    w = int(rng.integers(n))
                    if w != u and not state.has(u, w):
                        break
                state.remove((u, v) if u < v else (v, u))
                state.add(u, w, 0)
    for key in state.sorted_edges():
        state.sign[key] = _draw_sign(rng, cfg.pos_fraction)
    return state


def _triangle_flags(state):
    keys = state.sorted_edges()
    if not keys:
        return keys, np.zeros(0, dtype=bool)
    arr = np.array(keys, dtype=np.int64)
    indptr, indices = state.csr()
    counts = _kernels.common_neighbor_counts(indptr, indices, arr[:, 0], arr[:, 1])
    return keys, counts > 0


def _sample_open_triad(state, rng, max_tries=200):
    """Pick a wedge u - w - v with u, v non-adjacent; centre chosen by wedge count."""
    deg = state.degrees().astype(np.float64)
    wedges = deg * (deg - 1) / 2.0
    total = wedges.sum()
    if total <= 0:
        return None
    p = wedges / total
    for _ in range(max_tries):
        w = int(rng.choice(state.n, p=p))
        nbrs = sorted(state.adj[w])
        i, j = rng.choice(len(nbrs), size=2, replace=False)
        u, v = nbrs[i], nbrs[j]
        if not state.has(u, v):
            su = state.sign[(u, w) if u < w else (w, u)]
            sv = state.sign[(v, w) if v < w else (w, v)]
            return u, v, su * sv
    return None


def _ws_step(state, cfg: WsConfig, rng):
    stats = {}
    keys, tri = _triangle_flags(state)
    probs = np.where(tri, cfg.persist_triangle, cfg.persist_other)
    keep = rng.random(len(keys)) < probs
    for key, k in zip(keys, keep):
        if not k:
            state.remove(key)
    stats["persisted"] = int(keep.sum())
    stats["removed"] = int((~keep).sum())
    _flip_signs(state, rng, cfg.sign_flip_p, stats)

    n_new = math.floor(cfg.new_edge_rate * cfg.n)
    n_triad = math.floor(cfg.triad_fraction * n_new + 0.5)
    added_triad = 0
    for _ in range(n_triad):
        triad = _sample_open_triad(state, rng)
        if triad is None:
            break
        u, v, s = triad
        state.add(u, v, s)
        added_triad += 1
    added_random = 0
    for _ in range(n_new - added_triad):
        added_random += _add_random_edge(state, rng, lambda u, v: _draw_sign(rng, cfg.pos_fraction))
    stats["added_triad"] = added_triad
    stats["added_random"] = added_random
    return stats


def generate_ws(cfg: WsConfig, stats: list | None = None) -> TemporalSignedGraph:
    """Temporal signed small-world network; per-step counters go to ``stats`` if given."""
    rng = np.random.default_rng(cfg.seed)
    state = _ws_initial(cfg, rng)
    snaps = [state.snapshot()]
    for _ in range(1, cfg.T):
        s = _ws_step(state, cfg, rng)
        if stats is not None:
            stats.append(s)
        snaps.append(state.snapshot())
    return TemporalSignedGraph(snaps)


# ---------------------------------------------------------------------------
# Barabasi-Albert
# ---------------------------------------------------------------------------

def _ba_initial(cfg: BaConfig, rng) -> _EdgeState:
    n, m = cfg.n, cfg.m_attach
    state = _EdgeState(n)
    # seed star on m + 1 nodes, then preferential attachment
    repeated = []
    for v in range(1, m + 1):
        state.add(0, v, 0)
        repeated.extend((0, v))
    for s in range(m + 1, n):
        targets = set()
        while len(targets) < m:
            targets.add(repeated[int(rng.integers(len(repeated)))])
        for t in sorted(targets):
            state.add(s, t, 0)
            repeated.extend((s, t))
    for key in state.sorted_edges():
        state.sign[key] = _draw_sign(rng, cfg.pos_fraction)
    return state


def hub_mask(degrees: np.ndarray, quantile: float) -> np.ndarray:
    return degrees >= np.quantile(degrees, quantile)


def _ba_step(state, cfg: BaConfig, rng):
    stats = {}
    deg = state.degrees()
    hub = hub_mask(deg, cfg.hub_degree_quantile)
    keys = state.sorted_edges()
    arr = np.array(keys, dtype=np.int64).reshape(-1, 2)
    at_hub = hub[arr[:, 0]] | hub[arr[:, 1]]
    keep = rng.random(len(keys)) < np.where(at_hub, cfg.persist_hub, cfg.persist_other)
    pruned = (rng.random(len(keys)) < cfg.prune_low_degree_p) & ~at_hub & keep
    keep &= ~pruned
    for key, k in zip(keys, keep):
        if not k:
            state.remove(key)
    stats["persisted"] = int(keep.sum())
    stats["removed"] = int((~keep).sum())
    stats["pruned"] = int(pruned.sum())
    _flip_signs(state, rng, cfg.sign_flip_p, stats)

    hub_pos = max(cfg.pos_fraction, cfg.hub_pos_fraction)
    n_new = math.floor(cfg.new_edge_rate * cfg.n)
    added = 0
    for _ in range(n_new):
        d = state.degrees().astype(np.float64)
        p = d / d.sum() if d.sum() > 0 else np.full(cfg.n, 1.0 / cfg.n)
        for _try in range(1000):
            u = int(rng.integers(cfg.n))
            v = int(rng.choice(cfg.n, p=p))
            if u != v and not state.has(u, v):
                frac = hub_pos if (hub[u] or hub[v]) else cfg.pos_fraction
                state.add(u, v, _draw_sign(rng, frac))
                added += 1
                break
    stats["added"] = added
    return stats


def generate_ba(cfg: BaConfig, stats: list | None = None) -> TemporalSignedGraph:
    """Temporal signed scale-free network over a fixed node set."""
    rng = np.random.default_rng(cfg.seed)
    state = _ba_initial(cfg, rng)
    snaps = [state.snapshot()]
    for _ in range(1, cfg.T):
        s = _ba_step(state, cfg, rng)
        if stats is not None:
            stats.append(s)
        snaps.append(state.snapshot())
    return TemporalSignedGraph(snaps)


GENERATORS = {"ws": (WsConfig, generate_ws), "ba": (BaConfig, generate_ba)}


def generation_manifest(kind: str, cfg) -> dict:
    doc = {"generator": kind, "config": asdict(cfg), "seed": cfg.seed}
    if kind == "ws":
        doc["neighbourhood_reading"] = (
            f"half_k={cfg.half_k} neighbours on each side, total initial degree {2 * cfg.half_k}")
    return doc


def from_config(doc: dict):
    """Build (kind, config) from a ``{"generator": ..., **fields}`` mapping."""
    doc = dict(doc)
    kind = doc.pop("generator", None)
    if kind not in GENERATORS:
        raise ConfigError(f"unknown generator {kind!r}; expected one of {sorted(GENERATORS)}")
    cls = GENERATORS[kind][0]
    try:
        return kind, cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad {kind} generator config: {exc}") from None


def generate(kind: str, cfg, stats=None) -> TemporalSignedGraph:
    return GENERATORS[kind][1](cfg, stats)
