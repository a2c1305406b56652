"""Numba vs numpy timings for the kernels in ``temporal_signed._kernels``.

    python benchmarks/bench_kernels.py [--repeats 7] [--json out.json]

Both backends are called through their explicit ``*_numpy`` / ``*_numba``
names, so the ``TEMPORAL_SIGNED_NUMBA`` flag does not matter here. Each
case is checked for agreement before it is timed.
"""

from __future__ import annotations

import argparse
import json
import platform
import time

import numpy as np

from temporal_signed import _kernels as K
from temporal_signed.synth import BaConfig, generate_ba


def best_of(fn, args, repeats):
    fn(*args)  # compile / warm
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def attention_case(rng, batch, seq, dim):
    q, k, v = (rng.standard_normal((batch, seq, dim)) for _ in range(3))
    bias = rng.standard_normal((seq, seq))
    return q, k, v, bias, 1.0 / np.sqrt(dim)


def cases(rng):
    # backbone attention: heads x nodes x head_dim
    for n in (300, 1000):
        yield f"attention_forward backbone n={n}", "attention_forward", attention_case(rng, 8, n, 8)
        q, k, v, bias, scale = attention_case(rng, 8, n, 8)
        _, probs = K.attention_forward_numpy(q, k, v, bias, scale)
        dout = rng.standard_normal(q.shape)
        yield (f"attention_backward backbone n={n}", "attention_backward",
               (q, k, v, probs, dout, scale))
    # temporal attention: (nodes * heads) x T x head_dim
    for T in (4, 8):
        yield (f"attention_forward temporal n=1000 T={T}", "attention_forward",
               attention_case(rng, 8000, T, 8))
    g = generate_ba(BaConfig(n=2000, T=2, seed=0))[0]
    a = g.adjacency() != 0
    a = a | a.T
    indptr = np.concatenate([[0], np.cumsum(a.sum(axis=1))]).astype(np.int64)
    indices = np.nonzero(a)[1].astype(np.int64)
    yield ("common_neighbor_counts ba n=2000", "common_neighbor_counts",
           (indptr, indices, g.src.astype(np.int64), g.dst.astype(np.int64)))
    for m in (1_000, 100_000):
        scores = np.round(rng.standard_normal(m), 2)  # rounding creates ties
        yield f"mann_whitney_auc m={m}", "mann_whitney_auc", (scores, rng.random(m) < 0.8)


def agree(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(x, y, rtol=1e-10, atol=1e-12) for x, y in zip(a, b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", dest="json_path")
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'case':44s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for label, name, inputs in cases(rng):
        f_np = K.IMPLEMENTATIONS["numpy"][name]
        f_nb = K.IMPLEMENTATIONS["numba"][name]
        if not agree(f_np(*inputs), f_nb(*inputs)):
            raise SystemExit(f"backends disagree on {label}")
        t_np = best_of(f_np, inputs, args.repeats)
        t_nb = best_of(f_nb, inputs, args.repeats)
        rows.append({"case": label, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb})
        print(f"{label:44s} {t_np * 1e3:10.3f} {t_nb * 1e3:10.3f} {t_np / t_nb:8.2f}")
    if args.json_path:
        with open(args.json_path, "w") as fh:
            json.dump({"platform": platform.platform(), "numpy": np.__version__,
                       "repeats": args.repeats, "results": rows}, fh, indent=1)


if __name__ == "__main__":
    main()
