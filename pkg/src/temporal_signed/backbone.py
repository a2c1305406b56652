"""SE-SGformer-style snapshot encoder.

A deliberately simplified signed-graph transformer:

1. spectral node features from the SVD of the (symmetrized) signed adjacency;
2. ``num_layers`` transformer layers whose attention logits receive a
   learnable scalar bias chosen by the relation class of the node pair
   (positive edge, negative edge, no edge);
3. a bilinear edge scoring head.

Layer equations, for input ``X`` (n x d)::

    logits_h = (X Wq)_h (X Wk)_h^T / sqrt(d_head) + bias[rel]
    X  <- X + concat_h(softmax(logits_h) (X Wv)_h) Wo + bo
    X  <- X + tanh(X W1 + b1) W2 + b2
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, NumericError, ShapeError
from .graph import SnapshotGraph, TemporalSignedGraph
from .params import ParamSet, xavier

# relation classes indexing the per-layer bias vector
REL_NONE, REL_POS, REL_NEG = 0, 1, 2

DENSE_SVD_LIMIT = 1500


@dataclass(frozen=True)
class BackboneConfig:
    embed_dim: int = 64
    num_layers: int = 1
    num_heads: int = 8
    ff_hidden: int | None = None

    def __post_init__(self):
        if self.embed_dim < 1 or self.num_layers < 0 or self.num_heads < 1:
            raise ConfigError(f"invalid backbone config {self}")
        if self.embed_dim % self.num_heads:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads

    @property
    def ff_dim(self) -> int:
        return self.ff_hidden or 2 * self.embed_dim


def auto_embed_dim(n: int, num_heads: int, lo: int = 32, hi: int = 256) -> int:
    """2*ceil(sqrt(n)) rounded up to a multiple of ``num_heads``, clamped to [lo, hi]."""
    d = 2 * math.ceil(math.sqrt(n))
    d = -(-d // num_heads) * num_heads
    return int(min(max(d, lo), hi))


def init_backbone(cfg: BackboneConfig, rng: np.random.Generator) -> ParamSet:
    d, f = cfg.embed_dim, cfg.ff_dim
    p = ParamSet()
    for layer in range(cfg.num_layers):
        pre = f"layer{layer}."
        for m in ("wq", "wk", "wv", "wo"):
            p.add(pre + m, xavier(rng, d, d))
        p.add(pre + "bo", np.zeros(d))
        p.add(pre + "w1", xavier(rng, d, f))
        p.add(pre + "b1", np.zeros(f))
        p.add(pre + "w2", xavier(rng, f, d))
        p.add(pre + "b2", np.zeros(d))
        p.add(pre + "rel_bias", np.zeros(3))
    p.add("score.w", np.eye(d))
    p.add("score.b", np.zeros(()))
    return p


# ---------------------------------------------------------------------------
# stage 1: spectral features
# ---------------------------------------------------------------------------

def _sign_convention(vecs):
    idx = np.argmax(np.abs(vecs), axis=0)
    flip = vecs[idx, np.arange(vecs.shape[1])] < 0
    vecs[:, flip] *= -1.0
    return vecs


def spectral_features(g: SnapshotGraph, d: int) -> np.ndarray:
    """Top-``d`` left singular vectors of the symmetrized adjacency, scaled by sqrt(sigma).

    Each vector's largest-magnitude entry is made nonnegative; columns beyond
    the numerical rank are zero.
    """
    n = g.node_count
    if d > n:
        raise ShapeError(f"embedding dimension {d} exceeds node count {n}")
    return _spectral_cached(g, d).copy()


@lru_cache(maxsize=256)
def _spectral_cached(g: SnapshotGraph, d: int) -> np.ndarray:
    n = g.node_count
    out = np.zeros((n, d))
    if g.num_edges == 0:
        return out
    a = g.symmetrized_adjacency()
    if n <= DENSE_SVD_LIMIT or d >= n - 1:
        vals, vecs = np.linalg.eigh(a)
    else:
        v0 = np.ones(n) / math.sqrt(n)
        vals, vecs = spla.eigsh(a, k=d, which="LM", v0=v0, tol=1e-10)
    sigma = np.abs(vals)
    order = np.argsort(-sigma, kind="stable")[:d]
    sigma, vecs = sigma[order], _sign_convention(vecs[:, order].copy())
    tol = max(sigma.max(), 1.0) * n * np.finfo(float).eps
    keep = sigma > tol
    k = sigma.size
    out[:, :k] = np.where(keep, vecs * np.sqrt(np.where(keep, sigma, 0.0)), 0.0)
    out.setflags(write=False)
    return out


def relation_index(g: SnapshotGraph) -> np.ndarray:
    a = g.adjacency()
    rel = np.full(a.shape, REL_NONE, dtype=np.int64)
    rel[a > 0] = REL_POS
    rel[a < 0] = REL_NEG
    return rel


# ---------------------------------------------------------------------------
# stages 2-3: relation-biased transformer layers
# ---------------------------------------------------------------------------

def _split_heads(x: Tensor, n, heads, dh):
    return ad.transpose(ad.reshape(x, (n, heads, dh)), (1, 0, 2))


def _merge_heads(x: Tensor, n, d):
    return ad.reshape(ad.transpose(x, (1, 0, 2)), (n, d))


def encode_snapshot(g: SnapshotGraph, x, params, cfg: BackboneConfig, *, rel=None,
                    return_attention=False):
    """Run the transformer layers over node features ``x`` (n x d).

    ``params`` is a ParamSet or a name -> Tensor mapping; gradients flow to
    whichever entries require them.
    """
    x = ad.as_tensor(x)
    n, d = x.shape
    if d != cfg.embed_dim:
        raise ShapeError(f"features have width {d}, backbone expects {cfg.embed_dim}")
    if n != g.node_count:
        raise ShapeError(f"features have {n} rows, graph has {g.node_count} nodes")
    if rel is None:
        rel = relation_index(g)
    heads, dh = cfg.num_heads, cfg.head_dim
    scale = 1.0 / math.sqrt(dh)
    attn_maps = []
    h = x
    for layer in range(cfg.num_layers):
        pre = f"layer{layer}."
        bias = ad.gather(params[pre + "rel_bias"], rel)
        q = _split_heads(h @ params[pre + "wq"], n, heads, dh)
        k = _split_heads(h @ params[pre + "wk"], n, heads, dh)
        v = _split_heads(h @ params[pre + "wv"], n, heads, dh)
        att, probs = ad.attention(q, k, v, bias, scale)
        attn_maps.append(probs)
        h = h + _merge_heads(att, n, d) @ params[pre + "wo"] + params[pre + "bo"]
        ff = ad.tanh(h @ params[pre + "w1"] + params[pre + "b1"]) @ params[pre + "w2"]
        h = h + ff + params[pre + "b2"]
        if not np.all(np.isfinite(h.data)):
            raise NumericError(f"non-finite activations after backbone layer {layer}")
    if return_attention:
        return h, attn_maps
    return h


def score_edge(z_u, z_v, w, b=0.0) -> float:
    """Bilinear logit z_u^T W z_v + b; positive sign predicted iff the logit is > 0."""
    return float(np.asarray(z_u) @ np.asarray(w) @ np.asarray(z_v) + b)


def score_edges(z: Tensor, src, dst, params) -> Tensor:
    zu = ad.take_rows(z, src)
    zv = ad.take_rows(z, dst)
    return ad.tsum((zu @ params["score.w"]) * zv, axis=1) + params["score.b"]


# ---------------------------------------------------------------------------
# sequence embedding with caching
# ---------------------------------------------------------------------------

class EmbeddingCache:
    """Snapshot embeddings keyed by (snapshot content hash, parameter version)."""

    def __init__(self):
        self._store: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.RLock()
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, key, compute):
        with self._lock:
            hit = self._store.get(key)
            if hit is not None:
                self.hits += 1
                return hit
            self.misses += 1
        value = compute()
        value.setflags(write=False)
        with self._lock:
            self._store.setdefault(key, value)
            return self._store[key]

    def clear(self):
        with self._lock:
            self._store.clear()
            self.hits = self.misses = 0

    def __len__(self):
        return len(self._store)


def embed_snapshot(g: SnapshotGraph, params, cfg: BackboneConfig) -> Tensor:
    return encode_snapshot(g, spectral_features(g, cfg.embed_dim), params, cfg)


def embed_sequence(tg: TemporalSignedGraph | list, params: ParamSet, cfg: BackboneConfig,
                   cache: EmbeddingCache | None = None) -> list[np.ndarray]:
    """Constant embeddings Z(t) for every snapshot, using ``cache`` when given."""
    snapshots = list(tg)
    frozen = params.frozen() if isinstance(params, ParamSet) else params
    version = params.version() if isinstance(params, ParamSet) else None
    out = []
    for g in snapshots:
        def compute(g=g):
            return np.array(embed_snapshot(g, frozen, cfg).data, copy=True)

        if cache is None or version is None:
            out.append(compute())
        else:
            out.append(cache.get_or_compute((g.content_hash, version), compute))
    return out
