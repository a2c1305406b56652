"""Signed and temporal signed graph data model.

Nodes are dense 0-based indices. A snapshot stores its edges as three
parallel, canonically sorted integer arrays (``src``, ``dst``, ``sign``);
undirected snapshots store each pair once with ``src < dst``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, SelfLoopError, ShapeError, SignConflictError


@dataclass(frozen=True)
class SignedEdge:
    src: int
    dst: int
    sign: int
    timestamp: int | None = None

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"edge sign must be +1 or -1, got {self.sign!r}")
        if self.src == self.dst:
            raise SelfLoopError(f"self-loop on node {self.src}")
        if self.src < 0 or self.dst < 0:
            raise IndexError(f"negative node index in edge ({self.src}, {self.dst})")


class SnapshotGraph:
    """One immutable signed graph over a fixed node set."""

    __slots__ = ("_n", "_directed", "_src", "_dst", "_sign", "__dict__")

    def __init__(self, node_count, src, dst, sign, directed):
        # Trusted constructor: arrays must already be canonical. Use build_snapshot.
        self._n = int(node_count)
        self._directed = bool(directed)
        self._src = np.asarray(src, dtype=np.int64)
        self._dst = np.asarray(dst, dtype=np.int64)
        self._sign = np.asarray(sign, dtype=np.int8)
        for arr in (self._src, self._dst, self._sign):
            arr.setflags(write=False)

    @property
    def node_count(self) -> int:
        return self._n

    @property
    def directed(self) -> bool:
        return self._directed

    @property
    def src(self) -> np.ndarray:
        return self._src

    @property
    def dst(self) -> np.ndarray:
        return self._dst

    @property
    def sign(self) -> np.ndarray:
        return self._sign

    @property
    def num_edges(self) -> int:
        return int(self._src.size)

    @cached_property
    def pos_edges(self) -> frozenset:
        m = self._sign > 0
        return frozenset(zip(self._src[m].tolist(), self._dst[m].tolist()))

    @cached_property
    def neg_edges(self) -> frozenset:
        m = self._sign < 0
        return frozenset(zip(self._src[m].tolist(), self._dst[m].tolist()))

    @cached_property
    def _lookup(self) -> dict:
        return dict(zip(zip(self._src.tolist(), self._dst.tolist()), self._sign.tolist()))

    def edges(self) -> list[tuple[int, int, int]]:
        return list(zip(self._src.tolist(), self._dst.tolist(), self._sign.tolist()))

    def entry(self, u: int, v: int) -> int:
        if not (0 <= u < self._n and 0 <= v < self._n):
            raise IndexError(f"node pair ({u}, {v}) out of range for n={self._n}")
        if not self._directed and u > v:
            u, v = v, u
        return self._lookup.get((u, v), 0)

    def adjacency(self) -> np.ndarray:
        """Dense signed adjacency in {-1, 0, +1}; symmetric for undirected graphs."""
        a = np.zeros((self._n, self._n), dtype=np.int8)
        a[self._src, self._dst] = self._sign
        if not self._directed:
            a[self._dst, self._src] = self._sign
        return a

    def symmetrized_adjacency(self) -> np.ndarray:
        """sign(A + A^T) as float64; opposite-sign reciprocal pairs cancel to 0."""
        a = self.adjacency().astype(np.float64)
        if self._directed:
            a = np.sign(a + a.T)
        return a

    def degrees(self) -> np.ndarray:
        """Total degree per node (in + out for directed), both polarities counted."""
        return (np.bincount(self._src, minlength=self._n)
                + np.bincount(self._dst, minlength=self._n))

    def without_pairs(self, pairs: Iterable[tuple[int, int]]) -> "SnapshotGraph":
        drop = set()
        for u, v in pairs:
            if not self._directed and u > v:
                u, v = v, u
            drop.add((u, v))
        keep = np.array([(s, d) not in drop for s, d in zip(self._src.tolist(), self._dst.tolist())],
                        dtype=bool)
        return SnapshotGraph(self._n, self._src[keep], self._dst[keep], self._sign[keep], self._directed)

    @cached_property
    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self._n}:{int(self._directed)}:".encode())
        h.update(self._src.tobytes())
        h.update(self._dst.tobytes())
        h.update(self._sign.tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, SnapshotGraph):
            return NotImplemented
        return self.content_hash == other.content_hash

    def __hash__(self):
        return hash(self.content_hash)

    def __repr__(self):
        kind = "directed" if self._directed else "undirected"
        return (f"SnapshotGraph(n={self._n}, {kind}, +{len(self.pos_edges)}/"
                f"-{len(self.neg_edges)})")


def _canonical(n, src, dst, sign, directed):
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    sign = np.asarray(sign, dtype=np.int8)
    if not directed:
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        src, dst = lo, hi
    order = np.lexsort((dst, src))
    return src[order], dst[order], sign[order]


def build_snapshot(n: int, edges: Iterable, directed: bool = False) -> SnapshotGraph:
    """Validate and build a snapshot from ``SignedEdge`` objects or ``(src, dst, sign)`` triples.

    Same-sign duplicates collapse silently; opposite-sign duplicates raise
    ``SignConflictError``; self-loops raise ``SelfLoopError``.
    """
    if n < 1:
        raise ConfigError(f"node count must be >= 1, got {n}")
    seen: dict[tuple[int, int], int] = {}
    for e in edges:
        if isinstance(e, SignedEdge):
            u, v, s = e.src, e.dst, e.sign
        else:
            u, v, s = int(e[0]), int(e[1]), int(e[2])
        if s not in (1, -1):
            raise ValueError(f"edge sign must be +1 or -1, got {s!r}")
        if u == v:
            raise SelfLoopError(f"self-loop on node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise IndexError(f"edge ({u}, {v}) has an endpoint outside [0, {n})")
        key = (u, v) if directed or u < v else (v, u)
        prev = seen.get(key)
        if prev is None:
            seen[key] = s
        elif prev != s:
            raise SignConflictError(f"pair {key} given both signs")
    if seen:
        pairs = np.array(list(seen.keys()), dtype=np.int64)
        signs = np.fromiter(seen.values(), dtype=np.int8, count=len(seen))
        src, dst, sign = _canonical(n, pairs[:, 0], pairs[:, 1], signs, directed)
    else:
        src = dst = np.zeros(0, dtype=np.int64)
        sign = np.zeros(0, dtype=np.int8)
    return SnapshotGraph(n, src, dst, sign, directed)


def snapshot_from_arrays(n, src, dst, sign, directed) -> SnapshotGraph:
    """Fast path for generators: arrays must hold unique pairs without self-loops."""
    src, dst, sign = _canonical(n, src, dst, sign, directed)
    return SnapshotGraph(n, src, dst, sign, directed)


def signed_adjacency_entry(g: SnapshotGraph, u: int, v: int) -> int:
    return g.entry(u, v)


class TemporalSignedGraph:
    """An ordered sequence of snapshots over one fixed node set."""

    def __init__(self, snapshots: Sequence[SnapshotGraph]):
        snapshots = tuple(snapshots)
        if not snapshots:
            raise ConfigError("a temporal graph needs at least one snapshot")
        n = snapshots[0].node_count
        directed = snapshots[0].directed
        for t, s in enumerate(snapshots):
            if s.node_count != n:
                raise ShapeError(f"snapshot {t} has {s.node_count} nodes, expected {n}")
            if s.directed != directed:
                raise ShapeError(f"snapshot {t} directedness differs from snapshot 0")
        self.snapshots = snapshots
        self.node_count = n
        self.directed = directed

    @property
    def T(self) -> int:
        return len(self.snapshots)

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, t):
        return self.snapshots[t]

    def __iter__(self):
        return iter(self.snapshots)

    def __eq__(self, other):
        if not isinstance(other, TemporalSignedGraph):
            return NotImplemented
        return self.snapshots == other.snapshots

    def __repr__(self):
        return f"TemporalSignedGraph(n={self.node_count}, T={self.T}, directed={self.directed})"


@dataclass(frozen=True)
class DegreeStats:
    median_degree: float
    mean_degree: float
    max_degree: float
    max_to_median_ratio: float
    top_fraction_edge_share: float

    def as_dict(self) -> dict:
        return {
            "median_degree": self.median_degree,
            "mean_degree": self.mean_degree,
            "max_degree": self.max_degree,
            "max_to_median_ratio": self.max_to_median_ratio,
            "top_fraction_edge_share": self.top_fraction_edge_share,
        }


def degree_statistics(g: SnapshotGraph, top_fraction: float = 0.01) -> DegreeStats:
    """Degree distribution summary; ``top_fraction`` selects the ceil(top_fraction*n) highest-degree nodes."""
    if not 0.0 <= top_fraction <= 1.0:
        raise ConfigError(f"top_fraction must lie in [0, 1], got {top_fraction}")
    if g.num_edges == 0:
        return DegreeStats(0.0, 0.0, 0.0, 0.0, 0.0)
    deg = g.degrees()
    med = float(np.median(deg))
    mx = float(deg.max())
    ratio = mx / med if med > 0 else math.inf
    k = math.ceil(top_fraction * g.node_count)
    top = np.zeros(g.node_count, dtype=bool)
    top[np.argsort(-deg, kind="stable")[:k]] = True
    touched = top[g.src] | top[g.dst]
    return DegreeStats(med, float(deg.mean()), mx, ratio, float(touched.sum()) / g.num_edges)


def clustering_coefficient(g: SnapshotGraph) -> float:
    """Average local clustering of the unsigned, undirected skeleton (isolated/degree-1 nodes count 0)."""
    nz = g.adjacency() != 0
    a = (nz | nz.T).astype(np.float64)
    np.fill_diagonal(a, 0.0)
    deg = a.sum(axis=1)
    tri = np.einsum("ij,jk,ki->i", a, a, a) / 2.0
    possible = deg * (deg - 1) / 2.0
    local = np.divide(tri, possible, out=np.zeros_like(tri), where=possible > 0)
    return float(local.mean())
