"""Gradient-check drivers shared by unit and acceptance tests."""

import numpy as np

from temporal_signed.backbone import encode_snapshot, score_edges
from temporal_signed.graph import build_snapshot
from temporal_signed.hcim import hcim_backward, hcim_forward

from _oracles import finite_difference, max_relative_error
from conftest import random_backbone, random_hcim


def hcim_gradient_error(seed, fusion, n=8, d=6, h=6, T=4, heads=2, step=1e-5):
    cfg, params, history, z = random_hcim(seed, n=n, d=d, h=h, T=T, heads=heads, fusion=fusion)
    g_out = np.random.default_rng(seed + 7).standard_normal((n, d))
    grads = hcim_backward(hcim_forward(history, z, params, cfg), g_out)
    arrays = dict(params.arrays())
    arrays["z_cur"] = z
    for t, x in enumerate(history):
        arrays[f"history[{t}]"] = x

    def loss():
        return float((hcim_forward(history, z, params.frozen(), cfg).output.data * g_out).sum())

    numeric = finite_difference(loss, arrays, step)
    return max_relative_error(grads, numeric), set(numeric)


def random_signed_graph(rng, n, p=0.4):
    edges = [(u, v, int(rng.choice([-1, 1]))) for u in range(n) for v in range(u + 1, n)
             if rng.random() < p]
    return build_snapshot(n, edges, directed=False)


def backbone_gradient_error(seed, n=8, d=6, layers=1, heads=2, step=1e-5):
    cfg, params = random_backbone(seed, d=d, layers=layers, heads=heads)
    rng = np.random.default_rng(seed + 11)
    g = random_signed_graph(rng, n)
    x = rng.standard_normal((n, d))
    src, dst = rng.integers(0, n, 10), rng.integers(0, n, 10)
    wts = rng.standard_normal(10)

    def value(p):
        return (score_edges(encode_snapshot(g, x, p, cfg), src, dst, p) * wts).sum()

    params.zero_grad()
    value(params).backward()
    analytic = params.grads()
    numeric = finite_difference(lambda: float(value(params.frozen()).data), params.arrays(), step)
    return max_relative_error(analytic, numeric), set(numeric)
