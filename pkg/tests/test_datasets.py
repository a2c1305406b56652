import gzip
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from temporal_signed.datasets import (RawRating, SnapshotConfig, binarize, discretize,
                                      discretize_detailed, load_ratings_dataset, parse_edge_csv,
                                      persistence_subset)
from temporal_signed.errors import ConfigError, DensityError, ParseError, SubsetEmptyError
from temporal_signed.graph import SignedEdge, TemporalSignedGraph, build_snapshot


def write(tmp_path, text, name="r.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_rows_and_boundary_rating(tmp_path):
    p = write(tmp_path, "6,2,4,1289241911\n35,13,-10,1289250111\n1,2,0,123\n")
    out = parse_edge_csv(p)
    assert out.ratings == [RawRating(6, 2, 4, 1289241911), RawRating(35, 13, -10, 1289250111)]
    assert out.rejected == [(3, "zero rating")]


def test_fractional_timestamps_and_gzip(tmp_path):
    p = tmp_path / "r.csv.gz"
    p.write_bytes(gzip.compress(b"7,5,2,1289241911.72836\n"))
    assert parse_edge_csv(p).ratings == [RawRating(7, 5, 2, 1289241911)]


@pytest.mark.parametrize("line", ["1,2,x,5", "1,2,3", "1,2,11,5", "1,2,3,nan"])
def test_malformed_line_reports_line_number(tmp_path, line):
    p = write(tmp_path, "1,2,3,4\n" + line + "\n")
    with pytest.raises(ParseError) as exc:
        parse_edge_csv(p)
    assert exc.value.line == 2 and "line 2" in str(exc.value)


@pytest.mark.parametrize("rating,sign", [(5, 1), (-3, -1), (1, 1), (-1, -1), (10, 1)])
def test_binarize(rating, sign):
    e = binarize(RawRating(4, 9, rating, 77))
    assert (e.src, e.dst, e.sign, e.timestamp) == (4, 9, sign, 77)


def test_raw_rating_invariant():
    with pytest.raises(ValueError):
        RawRating(1, 2, 0, 3)


def ratings_seq(m, seed=0, n_ids=6):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(m):
        u, v = rng.choice(n_ids, 2, replace=False)
        r = int(rng.choice([-3, -1, 2, 5]))
        out.append(RawRating(int(u) + 100, int(v) + 100, r, int(i * 10 + rng.integers(0, 5))))
    return out


def test_equal_frequency_interval_block_sizes():
    rs = [RawRating(i, i + 1, 1, t) for i, t in zip(range(12), range(0, 120, 10))]
    d = discretize_detailed(rs, SnapshotConfig(3, "equal-frequency", "interval"))
    assert d.interval_edge_counts == [4, 4, 4]
    assert [g.num_edges for g in d.graph] == [4, 4, 4]


def test_single_snapshot_config_rejected():
    with pytest.raises(ConfigError):
        SnapshotConfig(num_snapshots=1)


def test_most_recent_rating_wins():
    rs = [RawRating(1, 2, 1, 10), RawRating(1, 2, -1, 20), RawRating(3, 4, 1, 30),
          RawRating(5, 6, 1, 40), RawRating(5, 6, 1, 50), RawRating(3, 4, 1, 60)]
    tg = discretize(rs, SnapshotConfig(2, accumulation="cumulative"))
    idx = {ext: i for i, ext in enumerate(sorted({1, 2, 3, 4, 5, 6}))}
    assert tg[0].entry(idx[1], idx[2]) == -1
    # conflicting order reversed: the later positive rating wins
    rs2 = [RawRating(1, 2, -1, 10), RawRating(1, 2, 1, 20), RawRating(3, 4, 1, 30), RawRating(3, 4, 1, 40)]
    assert discretize(rs2, SnapshotConfig(2))[0].entry(0, 1) == 1


def test_density_error_names_snapshot():
    rs = [RawRating(1, 2, 1, 0), RawRating(2, 3, 1, 1), RawRating(3, 4, 1, 1000)]
    with pytest.raises(DensityError, match="snapshot 1"):
        discretize(rs, SnapshotConfig(4, "equal-width", "interval", min_edges_per_snapshot=1))


@given(st.integers(4, 60), st.integers(2, 6), st.integers(0, 10_000))
def test_equal_frequency_properties(m, T, seed):
    rng = np.random.default_rng(seed)
    # distinct pairs so that interval snapshots carry every rating unmerged
    pairs = [(u, v) for u in range(12) for v in range(12) if u != v]
    picks = rng.choice(len(pairs), m, replace=False)
    rs = [RawRating(pairs[i][0], pairs[i][1], int(rng.choice([-2, 3])), int(rng.integers(0, 50)))
          for i in picks]
    if len({r.timestamp for r in rs}) == 1:
        return
    d = discretize_detailed(rs, SnapshotConfig(T, "equal-frequency", "interval", 0))
    sizes = d.interval_edge_counts
    assert sum(sizes) == m and max(sizes) - min(sizes) <= 1
    idx = d.id_map
    union = Counter(e for g in d.graph for e in g.edges())
    expected = Counter((idx[r.source_id], idx[r.target_id], 1 if r.rating > 0 else -1) for r in rs)
    assert union == expected
    # blocks are contiguous in time
    last = -1
    for t, g in enumerate(d.graph):
        if g.num_edges:
            assert d.boundaries[t][0] >= last
            last = d.boundaries[t][1]


@given(st.integers(4, 60), st.integers(2, 6), st.integers(0, 10_000))
def test_cumulative_pairs_monotone(m, T, seed):
    rs = ratings_seq(m, seed)
    tg = discretize(rs, SnapshotConfig(T, accumulation="cumulative", min_edges_per_snapshot=0))
    for a, b in zip(tg, tg.snapshots[1:]):
        pa = {(u, v) for u, v, _ in a.edges()}
        pb = {(u, v) for u, v, _ in b.edges()}
        assert pa <= pb


def _tg(n, snaps):
    return TemporalSignedGraph([build_snapshot(n, [SignedEdge(u, v, s) for u, v, s in e], True)
                                for e in snaps])


def test_persistence_identity_when_all_active():
    tg = _tg(3, [[(0, 1, 1), (1, 2, -1)], [(2, 0, 1)]])
    assert persistence_subset(tg, 1) == tg


def test_persistence_drops_transient_node():
    tg = _tg(4, [[(0, 1, 1), (2, 3, 1)], [(0, 1, 1)], [(0, 1, -1)]])
    out, kept = persistence_subset(tg, 2, return_index=True)
    assert kept.tolist() == [0, 1] and out.node_count == 2
    assert [g.edges() for g in out] == [[(0, 1, 1)], [(0, 1, 1)], [(0, 1, -1)]]


def brute_persistent(tg, k):
    n = tg.node_count
    alive = set(range(n))
    while True:
        counts = {v: sum(any(v in (u, w) and u in alive and w in alive for u, w, _ in g.edges())
                         for g in tg) for v in alive}
        keep = {v for v, c in counts.items() if c >= k}
        if keep == alive:
            return sorted(alive)
        alive = keep


def test_persistence_toy_matches_brute_force():
    # nodes 0 and 1 interact in every snapshot; 2, 3, 4 appear once each
    tg = _tg(5, [[(0, 1, 1), (0, 2, 1)], [(1, 0, -1), (3, 1, 1)], [(0, 1, 1), (4, 0, 1)]])
    out, kept = persistence_subset(tg, 3, return_index=True)
    assert kept.tolist() == brute_persistent(tg, 3) == [0, 1]
    assert [g.edges() for g in out] == [[(0, 1, 1)], [(1, 0, -1)], [(0, 1, 1)]]


def test_single_persistent_node_has_no_induced_edges():
    tg = _tg(4, [[(0, 1, 1)], [(0, 2, 1)], [(0, 3, 1)]])
    with pytest.raises(SubsetEmptyError):
        persistence_subset(tg, 3)


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_persistence_idempotent(seed, k):
    rng = np.random.default_rng(seed)
    n = 8
    snaps = []
    for _ in range(3):
        pairs = {(int(u), int(v)) for u, v in rng.integers(0, n, (6, 2)) if u != v}
        snaps.append([(u, v, 1) for u, v in sorted(pairs)])
    tg = _tg(n, snaps)
    try:
        once, kept = persistence_subset(tg, k, return_index=True)
    except SubsetEmptyError:
        return
    assert kept.tolist() == brute_persistent(tg, k)
    assert persistence_subset(once, k) == once


def test_loader_manifest(tmp_path):
    rows = ["10,20,5,100", "20,30,-2,200", "30,10,1,300", "10,30,0,350", "40,10,3,400",
            "20,10,4,500", "30,40,-1,600"]
    p = write(tmp_path, "\n".join(rows) + "\n")
    ds = load_ratings_dataset(p, SnapshotConfig(3))
    m = ds.manifest
    assert m["node_ids"] == [10, 20, 30, 40] and m["node_count"] == 4
    assert m["edge_count"] == 6 and m["rejected_rows"] == 1
    assert m["positive_fraction"] == pytest.approx(4 / 6)
    assert m["snapshot_boundaries"] == [[100, 200], [300, 400], [500, 600]]
    assert ds.graph.T == 3 and ds.graph.directed
