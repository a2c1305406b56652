"""Ingestion of timestamped signed rating lists into snapshot sequences.

Input rows follow the public Bitcoin OTC / Alpha layout
``SOURCE,TARGET,RATING,TIME`` (optionally gzip-compressed). Ratings are
binarized by polarity; zero ratings have no polarity and are rejected.
"""

from __future__ import annotations

import gzip
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DensityError, ParseError, SubsetEmptyError
from .graph import SignedEdge, TemporalSignedGraph, build_snapshot, snapshot_from_arrays

EQUAL_FREQUENCY, EQUAL_WIDTH = "equal-frequency", "equal-width"
CUMULATIVE, INTERVAL = "cumulative", "interval"


@dataclass(frozen=True)
class RawRating:
    source_id: int
    target_id: int
    rating: int
    timestamp: int

    def __post_init__(self):
        if self.rating == 0 or abs(self.rating) > 10:
            raise ValueError(f"rating must be a nonzero integer in [-10, 10], got {self.rating}")


@dataclass(frozen=True)
class SnapshotConfig:
    num_snapshots: int = 6
    binning: str = EQUAL_FREQUENCY
    accumulation: str = CUMULATIVE
    min_edges_per_snapshot: int = 1

    def __post_init__(self):
        if self.num_snapshots < 2:
            raise ConfigError(f"num_snapshots must be >= 2, got {self.num_snapshots}")
        if self.binning not in (EQUAL_FREQUENCY, EQUAL_WIDTH):
            raise ConfigError(f"unknown binning {self.binning!r}")
        if self.accumulation not in (CUMULATIVE, INTERVAL):
            raise ConfigError(f"unknown accumulation {self.accumulation!r}")
        if self.min_edges_per_snapshot < 0:
            raise ConfigError("min_edges_per_snapshot must be >= 0")


@dataclass
class ParsedRatings:
    ratings: list
    rejected: list = field(default_factory=list)  # (line number, reason)

    @property
    def rejected_count(self) -> int:
        return len(self.rejected)


def _open_text(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return io.StringIO(raw.decode("utf-8"))


def _parse_int(token, what, lineno):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        pass
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{what} {token!r} is not a number", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} {token!r} is not finite", lineno)
    return math.floor(value)


def parse_edge_csv(path, fmt: str = "bitcoin") -> ParsedRatings:
    """Parse ``SOURCE,TARGET,RATING,TIME`` rows.

    Fractional timestamps are floored to whole seconds. Zero ratings and
    self-ratings are rejected and reported; anything unparseable raises
    :class:`ParseError` naming the line.
    """
    if fmt != "bitcoin":
        raise ConfigError(f"unsupported edge list format {fmt!r}")
    out = ParsedRatings([])
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if lineno == 1 and parts[0].strip().lower() in ("source", "src", "# source"):
                continue
            if len(parts) != 4:
                raise ParseError(f"expected 4 comma-separated fields, got {len(parts)}", lineno)
            src = _parse_int(parts[0], "source", lineno)
            dst = _parse_int(parts[1], "target", lineno)
            rating = _parse_int(parts[2], "rating", lineno)
            ts = _parse_int(parts[3], "timestamp", lineno)
            if rating == 0:
                out.rejected.append((lineno, "zero rating"))
                continue
            if abs(rating) > 10:
                raise ParseError(f"rating {rating} outside [-10, 10]", lineno)
            if src == dst:
                out.rejected.append((lineno, "self rating"))
                continue
            out.ratings.append(RawRating(src, dst, rating, ts))
    return out


def binarize(r: RawRating, src: int | None = None, dst: int | None = None) -> SignedEdge:
    """Polarity of the rating; ``src``/``dst`` override the IDs with dense indices."""
    return SignedEdge(r.source_id if src is None else src,
                      r.target_id if dst is None else dst,
                      1 if r.rating > 0 else -1, r.timestamp)


def node_index(ratings) -> dict[int, int]:
    ids = sorted({r.source_id for r in ratings} | {r.target_id for r in ratings})
    return {ext: i for i, ext in enumerate(ids)}


def _bin_ids(ts: np.ndarray, order: np.ndarray, cfg: SnapshotConfig) -> np.ndarray:
    """Snapshot index for every rating (aligned with the original order)."""
    T = cfg.num_snapshots
    bins = np.empty(ts.size, dtype=np.int64)
    if cfg.binning == EQUAL_FREQUENCY:
        for t, block in enumerate(np.array_split(order, T)):
            bins[block] = t
    else:
        lo, hi = ts.min(), ts.max()
        width = (hi - lo) / T
        b = np.floor((ts - lo) / width).astype(np.int64)
        bins[:] = np.clip(b, 0, T - 1)
    return bins


@dataclass
class Discretization:
    graph: TemporalSignedGraph
    id_map: dict
    boundaries: list   # per snapshot [first timestamp, last timestamp] of its own interval
    interval_edge_counts: list


def discretize_detailed(ratings, cfg: SnapshotConfig, id_map=None) -> Discretization:
    if not ratings:
        raise DataError("no ratings to discretize")
    ts = np.array([r.timestamp for r in ratings], dtype=np.int64)
    if ts.min() == ts.max():
        raise DataError("all timestamps are equal; cannot form time bins")
    id_map = id_map or node_index(ratings)
    n = len(id_map)
    order = np.argsort(ts, kind="stable")
    bins = _bin_ids(ts, order, cfg)
    state: dict[tuple[int, int], int] = {}
    snaps, bounds, counts = [], [], []
    pos = 0
    for t in range(cfg.num_snapshots):
        if cfg.accumulation == INTERVAL:
            state = {}
        members = order[bins[order] == t]
        counts.append(int(members.size))
        for i in members:  # time order, so the most recent rating wins
            r = ratings[i]
            e = binarize(r, id_map[r.source_id], id_map[r.target_id])
            state[(e.src, e.dst)] = e.sign
        pos += members.size
        if state:
            keys = np.array(list(state.keys()), dtype=np.int64)
            signs = np.fromiter(state.values(), dtype=np.int8, count=len(state))
            g = snapshot_from_arrays(n, keys[:, 0], keys[:, 1], signs, directed=True)
        else:
            g = build_snapshot(n, [], directed=True)
        if g.num_edges < cfg.min_edges_per_snapshot:
            raise DensityError(f"snapshot {t} has {g.num_edges} edges, "
                               f"below the minimum of {cfg.min_edges_per_snapshot}")
        snaps.append(g)
        bounds.append([int(ts[members].min()), int(ts[members].max())] if members.size else None)
    return Discretization(TemporalSignedGraph(snaps), id_map, bounds, counts)


def discretize(ratings, cfg: SnapshotConfig, id_map=None) -> TemporalSignedGraph:
    """Bin ratings into ``cfg.num_snapshots`` directed signed snapshots."""
    return discretize_detailed(ratings, cfg, id_map).graph


def _activity(tg: TemporalSignedGraph) -> np.ndarray:
    active = np.zeros((tg.T, tg.node_count), dtype=bool)
    for t, g in enumerate(tg):
        active[t, g.src] = True
        active[t, g.dst] = True
    return active.sum(axis=0)


def _induced(tg: TemporalSignedGraph, keep: np.ndarray) -> TemporalSignedGraph:
    new_index = np.full(tg.node_count, -1, dtype=np.int64)
    new_index[keep] = np.arange(int(keep.sum()))
    snaps = []
    for g in tg:
        m = keep[g.src] & keep[g.dst]
        snaps.append(snapshot_from_arrays(int(keep.sum()), new_index[g.src[m]], new_index[g.dst[m]],
                                          g.sign[m], g.directed))
    return TemporalSignedGraph(snaps)


def persistence_subset(tg: TemporalSignedGraph, min_snapshots: int, return_index=False):
    """Restrict to nodes that are active in at least ``min_snapshots`` snapshots.

    Removing a node can drop a neighbour below the threshold, so the filter
    is repeated until stable; the result therefore satisfies the threshold
    itself and a second application is a no-op.
    """
    if not 1 <= min_snapshots <= tg.T:
        raise ConfigError(f"min_snapshots must lie in [1, {tg.T}], got {min_snapshots}")
    kept = np.arange(tg.node_count)
    current = tg
    while True:
        keep = _activity(current) >= min_snapshots
        if not keep.any():
            raise SubsetEmptyError(f"no node is active in {min_snapshots} or more snapshots")
        if keep.all():
            break
        kept = kept[keep]
        current = _induced(current, keep)
    return (current, kept) if return_index else current


@dataclass
class Dataset:
    graph: TemporalSignedGraph
    manifest: dict


def load_ratings_dataset(path, cfg: SnapshotConfig, persistence_min: int | None = None) -> Dataset:
    """Parse, binarize and discretize a rating CSV, returning the graph and its loader manifest."""
    parsed = parse_edge_csv(path)
    if not parsed.ratings:
        raise DataError(f"{path}: no usable ratings")
    disc = discretize_detailed(parsed.ratings, cfg)
    graph = disc.graph
    external = [ext for ext, _ in sorted(disc.id_map.items(), key=lambda kv: kv[1])]
    if persistence_min is not None:
        graph, kept = persistence_subset(graph, persistence_min, return_index=True)
        external = [external[i] for i in kept.tolist()]
    n_pos = sum(1 for r in parsed.ratings if r.rating > 0)
    manifest = {
        "source": str(path),
        "snapshot_config": asdict(cfg),
        "node_count": graph.node_count,
        "edge_count": len(parsed.ratings),
        "positive_fraction": n_pos / len(parsed.ratings),
        "rejected_rows": parsed.rejected_count,
        "rejected_examples": parsed.rejected[:20],
        "snapshot_boundaries": disc.boundaries,
        "interval_edge_counts": disc.interval_edge_counts,
        "snapshot_edge_counts": [g.num_edges for g in graph],
        "node_ids": external,
        "persistence_min_snapshots": persistence_min,
    }
    return Dataset(graph, manifest)
