import numpy as np
import pytest

from temporal_signed.backbone import (BackboneConfig, EmbeddingCache, auto_embed_dim,
                                      embed_sequence, embed_snapshot, encode_snapshot,
                                      init_backbone, score_edge, score_edges, spectral_features)
from temporal_signed.errors import ConfigError, NumericError, ShapeError
from temporal_signed.graph import TemporalSignedGraph, build_snapshot

from _checks import backbone_gradient_error, random_signed_graph
from _oracles import backbone_layer_scalar
from conftest import random_backbone


def test_spectral_zero_graph():
    assert not spectral_features(build_snapshot(4, []), 3).any()


def test_spectral_swap_matrix():
    f = spectral_features(build_snapshot(2, [(0, 1, 1)]), 2)
    np.testing.assert_allclose(np.linalg.norm(f, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.sort(np.linalg.norm(f, axis=0) ** 2), [1.0, 1.0], atol=1e-12)


def test_spectral_rank_deficient_star():
    # snapshots carry no self-loops, so an all-ones block is out of reach; the 3-node
    # star is the smallest rank-deficient case (sigma = sqrt2, sqrt2, 0)
    g = build_snapshot(3, [(0, 1, 1), (0, 2, 1)])
    f = spectral_features(g, 3)
    s = np.linalg.norm(f, axis=0) ** 2
    np.testing.assert_allclose(s, [np.sqrt(2), np.sqrt(2), 0.0], atol=1e-12)
    assert not f[:, 2].any()


def test_spectral_sign_convention_and_dimension_error(rng):
    g = random_signed_graph(rng, 9)
    f = spectral_features(g, 5)
    for col in f.T:
        if col.any():
            assert col[np.argmax(np.abs(col))] > 0
    with pytest.raises(ShapeError):
        spectral_features(g, 10)


@pytest.mark.parametrize("seed", range(5))
def test_spectral_reconstruction(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 21))
    g = random_signed_graph(rng, n)
    a = g.symmetrized_adjacency()
    f = spectral_features(g, n)
    vals, vecs = np.linalg.eigh(a)
    signs = np.sign(vals[np.argsort(-np.abs(vals), kind="stable")])
    # u_i sqrt(s_i) columns: sum s_i u_i v_i^T = A with v_i = sign(lambda_i) u_i
    np.testing.assert_allclose(f @ np.diag(signs) @ f.T, a, atol=1e-8)
    # and sum s_i u_i u_i^T is the matrix absolute value |A|
    absolute = vecs @ np.diag(np.abs(vals)) @ vecs.T
    np.testing.assert_allclose(f @ f.T, absolute, atol=1e-8)


def test_spectral_column_energy_is_singular_value():
    g = build_snapshot(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 1)])
    f = spectral_features(g, 4)
    assert np.allclose(np.sort(np.linalg.norm(f, axis=0) ** 2), [0, 0, 2, 2])


def test_auto_embed_dim():
    assert auto_embed_dim(10, 8) == 32
    assert auto_embed_dim(5900, 4) == 156
    assert auto_embed_dim(5900, 8) == 160
    assert auto_embed_dim(10**6, 8) == 256
    assert auto_embed_dim(1000, 8) % 8 == 0


def test_config_validation():
    with pytest.raises(ConfigError):
        BackboneConfig(embed_dim=10, num_heads=4)
    with pytest.raises(ConfigError):
        BackboneConfig(num_layers=-1)


def test_zero_layers_is_identity(rng):
    cfg = BackboneConfig(embed_dim=4, num_layers=0, num_heads=2)
    x = rng.standard_normal((5, 4))
    out = encode_snapshot(random_signed_graph(rng, 5), x, init_backbone(cfg, rng), cfg)
    assert np.array_equal(out.data, x)


def test_single_node_attends_to_itself(rng):
    cfg, params = random_backbone(0, d=4, heads=2)
    x = rng.standard_normal((1, 4))
    out, maps = encode_snapshot(build_snapshot(1, []), x, params, cfg, return_attention=True)
    assert maps[0].shape == (2, 1, 1) and np.all(maps[0] == 1.0)
    np.testing.assert_allclose(out.data, backbone_layer_scalar(x, [[0]], params.arrays(), 2),
                               atol=1e-12)


def test_hand_set_three_node_layer():
    cfg = BackboneConfig(embed_dim=2, num_layers=1, num_heads=1, ff_hidden=2)
    p = init_backbone(cfg, np.random.default_rng(0))
    eye = np.eye(2)
    for k in ("wq", "wk", "wv", "wo", "w1", "w2"):
        p[f"layer0.{k}"].data[...] = eye
    p["layer0.rel_bias"].data[...] = [0.0, 1.0, -1.0]
    g = build_snapshot(3, [(0, 1, 1), (1, 2, -1)])
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    out = encode_snapshot(g, x, p, cfg).data
    # node 0 by hand: logits = x0.xw / sqrt(2) + bias
    logits = np.array([1.0, 0.0, 1.0]) / np.sqrt(2) + np.array([0.0, 1.0, 0.0])
    pr = np.exp(logits) / np.exp(logits).sum()
    h = x[0] + pr @ x
    want = h + np.tanh(h)
    np.testing.assert_allclose(out[0], want, atol=1e-14)
    np.testing.assert_allclose(out, backbone_layer_scalar(x, g.adjacency().tolist(),
                                                          p.arrays(), 1), atol=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_layer_matches_scalar_oracle(seed):
    rng = np.random.default_rng(seed)
    cfg, params = random_backbone(seed, d=6, heads=3)
    g = random_signed_graph(rng, 7)
    x = rng.standard_normal((7, 6))
    out = encode_snapshot(g, x, params, cfg).data
    want = backbone_layer_scalar(x, g.adjacency().tolist(), params.arrays(), 3)
    np.testing.assert_allclose(out, want, atol=1e-12)


def test_directed_relation_bias_uses_row_to_column_entry():
    cfg, params = random_backbone(3, d=4, heads=2)
    g = build_snapshot(3, [(0, 1, 1), (2, 0, -1)], directed=True)
    x = np.random.default_rng(3).standard_normal((3, 4))
    want = backbone_layer_scalar(x, g.adjacency().tolist(), params.arrays(), 2)
    np.testing.assert_allclose(encode_snapshot(g, x, params, cfg).data, want, atol=1e-12)


def test_attention_rows_sum_to_one(rng):
    cfg, params = random_backbone(1, d=8, layers=2, heads=4)
    g = random_signed_graph(rng, 12)
    _, maps = encode_snapshot(g, spectral_features(g, 8), params, cfg, return_attention=True)
    for m in maps:
        np.testing.assert_allclose(m.sum(axis=-1), 1.0, atol=1e-12)


def test_permutation_equivariance(rng):
    cfg, params = random_backbone(2, d=6, layers=2, heads=2)
    n = 10
    g = random_signed_graph(rng, n)
    x = rng.standard_normal((n, 6))
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    gp = build_snapshot(n, [(int(inv[u]), int(inv[v]), s) for u, v, s in g.edges()])
    out = encode_snapshot(g, x, params, cfg).data
    out_p = encode_snapshot(gp, x[perm], params, cfg).data
    np.testing.assert_allclose(out_p, out[perm], atol=1e-12, rtol=0)


def test_numeric_error_names_layer(rng):
    cfg, params = random_backbone(0, d=4, layers=2, heads=1)
    params["layer1.b2"].data[0] = np.inf
    with pytest.raises(NumericError, match="layer 1"):
        encode_snapshot(random_signed_graph(rng, 4), rng.standard_normal((4, 4)), params, cfg)


def test_shape_errors(rng):
    cfg, params = random_backbone(0, d=4)
    g = random_signed_graph(rng, 4)
    with pytest.raises(ShapeError):
        encode_snapshot(g, np.zeros((4, 3)), params, cfg)
    with pytest.raises(ShapeError):
        encode_snapshot(g, np.zeros((5, 4)), params, cfg)


def test_score_edge_examples():
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    assert score_edge(e1, e1, np.eye(3)) == 1.0
    assert score_edge(e1, e2, np.eye(3)) == 0.0
    assert score_edge(e1, e2 + e1, np.zeros((3, 3))) == 0.0
    assert init_backbone(BackboneConfig(4, 1, 2), np.random.default_rng(0))["score.w"].data.tolist() \
        == np.eye(4).tolist()


def test_score_edges_matches_scalar(rng):
    cfg, params = random_backbone(0, d=4)
    z = rng.standard_normal((5, 4))
    src, dst = np.array([0, 3, 4]), np.array([1, 3, 0])
    got = score_edges(params["score.w"].__class__(z), src, dst, params).data
    w, b = params["score.w"].data, float(params["score.b"].data)
    assert got.tolist() == pytest.approx([score_edge(z[u], z[v], w, b) for u, v in zip(src, dst)],
                                         abs=1e-13)


def test_embed_sequence_single_snapshot(rng):
    cfg, params = random_backbone(0, d=4, heads=2)
    g = random_signed_graph(rng, 6)
    seq = embed_sequence(TemporalSignedGraph([g]), params, cfg)
    assert len(seq) == 1
    np.testing.assert_array_equal(seq[0], embed_snapshot(g, params.frozen(), cfg).data)


def test_cache_identical_snapshots_one_miss_one_hit(rng):
    cfg, params = random_backbone(0, d=4, heads=2)
    g = random_signed_graph(rng, 6)
    cache = EmbeddingCache()
    seq = embed_sequence(TemporalSignedGraph([g, g]), params, cfg, cache)
    assert (cache.misses, cache.hits) == (1, 1)
    np.testing.assert_array_equal(seq[0], seq[1])
    assert not seq[0].flags.writeable


def test_cache_enabled_equals_disabled_and_tracks_version(rng):
    cfg, params = random_backbone(4, d=4, heads=2)
    tg = TemporalSignedGraph([random_signed_graph(rng, 8) for _ in range(3)])
    cache = EmbeddingCache()
    a = embed_sequence(tg, params, cfg, cache)
    b = embed_sequence(tg, params, cfg)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    embed_sequence(tg, params, cfg, cache)
    assert (cache.misses, cache.hits) == (3, 3)
    params["layer0.bo"].data[0] += 1.0
    embed_sequence(tg, params, cfg, cache)
    assert cache.misses == 6


def test_backbone_gradient_check_small():
    err, names = backbone_gradient_error(0, n=6, d=4, heads=1)
    assert "layer0.rel_bias" in names and "score.w" in names
    assert err <= 1e-4
