import json

import numpy as np
import pytest

from temporal_signed import io
from temporal_signed.errors import ConfigError
from temporal_signed.graph import clustering_coefficient, degree_statistics
from temporal_signed.synth import (BaConfig, WsConfig, from_config, generate, generate_ba,
                                   generate_ws, generation_manifest)

FROZEN_WS = dict(sign_flip_p=0.0, persist_triangle=1.0, persist_other=1.0, new_edge_rate=0.0)
FROZEN_BA = dict(sign_flip_p=0.0, persist_hub=1.0, persist_other=1.0, prune_low_degree_p=0.0,
                 new_edge_rate=0.0)


def observed_flip_rate(tg):
    """Share of pairs present in consecutive snapshots whose sign changed."""
    flips = kept = 0
    for a, b in zip(tg, tg.snapshots[1:]):
        sa = {(u, v): s for u, v, s in a.edges()}
        for u, v, s in b.edges():
            if (u, v) in sa:
                kept += 1
                flips += sa[(u, v)] != s
    return flips / kept


def test_ws_lattice_without_rewiring():
    g = generate_ws(WsConfig(n=40, rewire_p=0.0, seed=3))[0]
    assert np.all(g.degrees() == 6)
    expected = {(min(i, (i + j) % 40), max(i, (i + j) % 40)) for i in range(40) for j in (1, 2, 3)}
    assert {(u, v) for u, v, _ in g.edges()} == expected
    assert clustering_coefficient(g) == pytest.approx(0.6, abs=1e-15)


def test_ws_frozen_dynamics():
    tg = generate_ws(WsConfig(n=50, T=5, seed=1, **FROZEN_WS))
    assert all(g == tg[0] for g in tg)


def test_ba_frozen_dynamics():
    tg = generate_ba(BaConfig(n=50, T=4, seed=1, **FROZEN_BA))
    assert all(g == tg[0] for g in tg)


def test_ba_tree():
    g = generate_ba(BaConfig(n=60, m_attach=1, seed=2))[0]
    assert g.num_edges == 59
    # connected: union-find over the edges
    parent = list(range(60))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x
    for u, v, _ in g.edges():
        parent[find(u)] = find(v)
    assert len({find(i) for i in range(60)}) == 1


def test_ws_flip_rate():
    stats = []
    tg = generate_ws(WsConfig(n=500, T=6, seed=0), stats)
    assert abs(observed_flip_rate(tg) - 0.02) <= 0.01
    logged = sum(s["flipped"] for s in stats) / sum(s["persisted"] for s in stats)
    assert abs(logged - 0.02) <= 0.01


def test_ba_heavy_tail_over_seeds():
    hits = 0
    for seed in range(10):
        s = degree_statistics(generate_ba(BaConfig(n=500, m_attach=3, seed=seed))[-1])
        hits += s.max_degree >= 5 * s.median_degree
    assert hits >= 9


def test_ba_ratio_exceeds_ws():
    for seed in range(5):
        ba = degree_statistics(generate_ba(BaConfig(n=300, seed=seed))[0])
        ws = degree_statistics(generate_ws(WsConfig(n=300, seed=seed))[0])
        assert ba.max_to_median_ratio > ws.max_to_median_ratio


@pytest.mark.parametrize("kind,cls", [("ws", WsConfig), ("ba", BaConfig)])
def test_positive_fraction_band(kind, cls):
    # symmetric flips drift individual runs toward balance; the band holds for the seed average
    fr = np.array([[len(g.pos_edges) / g.num_edges for g in generate(kind, cls(seed=s))]
                   for s in range(20)])
    assert np.all(np.abs(fr.mean(axis=0) - 0.9) <= 0.1)
    assert np.all(fr[:, 0] >= 0.8)


@pytest.mark.parametrize("kind,cfg", [("ws", WsConfig(n=80, seed=9)), ("ba", BaConfig(n=80, seed=9))])
def test_determinism_byte_exact(kind, cfg, tmp_path):
    io.save_graph(generate(kind, cfg), tmp_path / "a.json")
    io.save_graph(generate(kind, cfg), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_snapshots_keep_invariants():
    for g in generate_ws(WsConfig(n=100, seed=5)):
        assert not (g.pos_edges & g.neg_edges)
        assert g.node_count == 100


def test_balanced_closure_signs():
    # with only triad closure and no flips, a closing edge's sign is the product of the wedge
    cfg = WsConfig(n=60, T=2, seed=7, sign_flip_p=0.0, persist_triangle=1.0, persist_other=1.0,
                   new_edge_rate=0.2, triad_fraction=1.0)
    tg = generate_ws(cfg)
    before = {(u, v): s for u, v, s in tg[0].edges()}
    sign = lambda a, b: before.get((min(a, b), max(a, b)))
    new = [(u, v, s) for u, v, s in tg[1].edges() if (u, v) not in before]
    assert new
    for u, v, s in new:
        wedges = {sign(u, w) * sign(v, w) for w in range(60)
                  if sign(u, w) is not None and sign(v, w) is not None}
        assert s in wedges


@pytest.mark.parametrize("bad", [dict(n=6, half_k=3), dict(T=1), dict(rewire_p=1.5), dict(new_edge_rate=-1)])
def test_ws_config_errors(bad):
    with pytest.raises(ConfigError):
        WsConfig(**bad)


def test_from_config_and_manifest():
    kind, cfg = from_config({"generator": "ws", "n": 30, "seed": 11})
    assert kind == "ws" and cfg.seed == 11
    m = generation_manifest(kind, cfg)
    assert m["seed"] == 11 and "total initial degree 6" in m["neighbourhood_reading"]
    json.dumps(m)
    with pytest.raises(ConfigError):
        from_config({"generator": "er"})
    with pytest.raises(ConfigError):
        from_config({"generator": "ba", "bogus": 1})
