"""Baseline and temporally enhanced training on a target snapshot.

Protocol: the signed edges of the target snapshot are split (stratified by
sign) into train and test sets. The target graph seen by the encoder has
the test edges removed; every snapshot strictly before the target forms the
history window. Training is full-batch logistic regression on edge signs.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .backbone import (BackboneConfig, EmbeddingCache, auto_embed_dim, embed_sequence,
                       encode_snapshot, init_backbone, relation_index, score_edges,
                       spectral_features)
from .errors import ConfigError, DivergenceError, NumericError, StratificationError
from .graph import SnapshotGraph, TemporalSignedGraph
from .hcim import HCIM, HcimConfig, constrained, init_hcim
from .params import ParamSet

BASELINE, ENHANCED = "baseline", "enhanced"


@dataclass(frozen=True)
class TrainConfig:
    model: str = ENHANCED
    fusion: str = "global"
    epochs: int = 300
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    optimizer: str = "adam"
    clip_norm: float = 1.0
    target_index: int | None = None
    train_fraction: float = 0.85
    seed: int = 0
    embed_dim: int | None = None
    num_layers: int = 1
    num_heads: int = 8
    hcim_hidden: int | None = None
    temporal_heads: int | None = None
    freeze_history_backbone: bool = True

    def __post_init__(self):
        if self.model not in (BASELINE, ENHANCED):
            raise ConfigError(f"model must be 'baseline' or 'enhanced', got {self.model!r}")
        if self.optimizer not in ("adam", "adamw"):
            raise ConfigError(f"optimizer must be 'adam' or 'adamw', got {self.optimizer!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.target_index is not None and self.target_index < 1:
            raise ConfigError("target_index must be >= 1 so that history exists")
        if self.epochs < 0 or self.clip_norm <= 0 or self.learning_rate < 0:
            raise ConfigError(f"invalid optimisation settings in {self}")

    def resolved_target(self, T: int) -> int:
        t = T - 2 if self.target_index is None else self.target_index
        if not 1 <= t < T:
            raise ConfigError(f"target snapshot {t} invalid for T={T} (need 1 <= target < T)")
        return t

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# data split
# ---------------------------------------------------------------------------

@dataclass
class EdgeSplit:
    target_index: int
    target_graph: SnapshotGraph
    history: list
    train_src: np.ndarray
    train_dst: np.ndarray
    train_sign: np.ndarray
    test_src: np.ndarray
    test_dst: np.ndarray
    test_sign: np.ndarray


def split_target_edges(tg: TemporalSignedGraph, cfg: TrainConfig) -> EdgeSplit:
    t = cfg.resolved_target(tg.T)
    target = tg[t]
    sign = target.sign.astype(np.int64)
    pos = np.flatnonzero(sign > 0)
    neg = np.flatnonzero(sign < 0)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(3)[0])
    pos = rng.permutation(pos)
    neg = rng.permutation(neg)
    total = sign.size
    n_train = math.floor(cfg.train_fraction * total + 0.5)
    # negatives in the test split: nearest count to its share, half rounding up
    n_neg_test = math.floor((total - n_train) * neg.size / total + 0.5)
    n_neg_train = min(max(neg.size - n_neg_test, 1), neg.size - 1)
    n_pos_train = n_train - n_neg_train
    if n_neg_train < 1 or neg.size - n_neg_train < 1:
        raise StratificationError(
            f"target snapshot {t} has {neg.size} negative edges; both splits need at least one")
    if not 0 < n_pos_train < pos.size:
        raise StratificationError(f"target snapshot {t} cannot place positives in both splits")
    train = np.sort(np.concatenate([pos[:n_pos_train], neg[:n_neg_train]]))
    test = np.sort(np.concatenate([pos[n_pos_train:], neg[n_neg_train:]]))
    src, dst = target.src, target.dst
    graph = target.without_pairs(zip(src[test].tolist(), dst[test].tolist()))
    return EdgeSplit(t, graph, list(tg.snapshots[:t]),
                     src[train].copy(), dst[train].copy(), sign[train].copy(),
                     src[test].copy(), dst[test].copy(), sign[test].copy())


# ---------------------------------------------------------------------------
# objective and optimisation
# ---------------------------------------------------------------------------

def loss_tensor(logits: Tensor, signs) -> Tensor:
    signs = np.asarray(signs, dtype=np.float64)
    if signs.size == 0:
        raise ValueError("loss of an empty batch is undefined")
    # -log sigmoid(s * logit) is the logistic loss with label (s + 1) / 2
    return ad.mean(ad.neg(ad.log_sigmoid(logits * signs)))


def loss(logits, signs) -> float:
    """Mean logistic loss with labels (sign + 1) / 2."""
    return float(loss_tensor(ad.as_tensor(logits), signs).data)


def global_norm(grads) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_gradients(grads: dict, max_norm: float) -> dict:
    """Rescale all gradients by max_norm / ||g|| when the global L2 norm exceeds ``max_norm``."""
    if max_norm <= 0:
        raise ConfigError(f"max_norm must be > 0, got {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


class Adam:
    """Adam / AdamW over a name -> array mapping, updated in place."""

    def __init__(self, lr=1e-3, weight_decay=0.0, decoupled=False,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.wd, self.decoupled = lr, weight_decay, decoupled
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, p in params.items():
            g = grads[k]
            if self.wd and not self.decoupled:
                g = g + self.wd * p
            m = self.m.setdefault(k, np.zeros_like(p))
            v = self.v.setdefault(k, np.zeros_like(p))
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if self.wd and self.decoupled:
                p -= self.lr * self.wd * p
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def optimizer_step(params: dict, grads: dict, state: Adam | None, cfg: TrainConfig) -> Adam:
    if state is None:
        state = Adam(cfg.learning_rate, cfg.weight_decay, decoupled=cfg.optimizer == "adamw")
    state.step(params, grads)
    return state


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

class LinkModel:
    """Backbone (+ optional HCIM) with a bilinear scoring head on one split."""

    def __init__(self, tg: TemporalSignedGraph, split: EdgeSplit, cfg: TrainConfig,
                 cache: EmbeddingCache | None = None):
        self.cfg = cfg
        self.split = split
        n = tg.node_count
        d = cfg.embed_dim or auto_embed_dim(n, cfg.num_heads)
        self.bcfg = BackboneConfig(embed_dim=d, num_layers=cfg.num_layers, num_heads=cfg.num_heads)
        seeds = np.random.SeedSequence(cfg.seed).spawn(3)
        self.backbone = init_backbone(self.bcfg, np.random.default_rng(seeds[1]))
        self.x_target = spectral_features(split.target_graph, d)
        self.rel_target = relation_index(split.target_graph)
        self.hcim = None
        if cfg.model == ENHANCED:
            self.hcfg = HcimConfig(embed_dim=d, hidden_dim=cfg.hcim_hidden,
                                   num_heads=cfg.temporal_heads or cfg.num_heads, fusion=cfg.fusion)
            self.hcim = HCIM(init_hcim(self.hcfg, np.random.default_rng(seeds[2])), self.hcfg)
            self.history_backbone = self.backbone.copy() if cfg.freeze_history_backbone else None
            self.cache = (cache if cache is not None else EmbeddingCache()) \
                if cfg.freeze_history_backbone else None

    def groups(self) -> dict[str, ParamSet]:
        out = {"backbone": self.backbone}
        if self.hcim is not None:
            out["hcim"] = self.hcim.params
        return out

    def flat_params(self) -> dict[str, Tensor]:
        return {f"{g}/{k}": t for g, ps in self.groups().items() for k, t in ps.items()}

    def history_embeddings(self):
        if self.cfg.freeze_history_backbone:
            return [Tensor(z) for z in embed_sequence(self.split.history, self.history_backbone,
                                                      self.bcfg, self.cache)]
        return [encode_snapshot(g, spectral_features(g, self.bcfg.embed_dim), self.backbone, self.bcfg)
                for g in self.split.history]

    def embeddings(self) -> Tensor:
        z = encode_snapshot(self.split.target_graph, self.x_target, self.backbone, self.bcfg,
                            rel=self.rel_target)
        if self.hcim is None:
            return z
        return self.hcim.forward(self.history_embeddings(), z)

    def logits(self, src, dst) -> Tensor:
        return score_edges(self.embeddings(), src, dst, self.backbone)


@dataclass
class TrainRun:
    config: dict
    seed: int
    loss_trace: list
    wall_clock: float
    params: dict
    test_scores: np.ndarray
    test_signs: np.ndarray
    interpretability: dict = field(default_factory=dict)
    cache_hits: int = 0
    cache_misses: int = 0


def train_run(tg: TemporalSignedGraph, cfg: TrainConfig, split: EdgeSplit | None = None,
              cache: EmbeddingCache | None = None) -> TrainRun:
    """Train one model; deterministic given ``cfg.seed``."""
    if tg.T < 2:
        raise ConfigError("training needs at least two snapshots")
    start = time.perf_counter()
    split = split or split_target_edges(tg, cfg)
    model = LinkModel(tg, split, cfg, cache)
    params = model.flat_params()
    arrays = {k: t.data for k, t in params.items()}
    opt = None
    trace = []
    for epoch in range(cfg.epochs):
        for t in params.values():
            t.grad = None
        try:
            loss_t = loss_tensor(model.logits(split.train_src, split.train_dst), split.train_sign)
        except DivergenceError:
            raise
        except NumericError as exc:
            raise DivergenceError(f"{exc} at epoch {epoch}", epoch=epoch) from exc
        value = float(loss_t.data)
        if not math.isfinite(value):
            raise DivergenceError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
        loss_t.backward()
        grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in params.items()}
        grads = clip_gradients(grads, cfg.clip_norm)
        opt = optimizer_step(arrays, grads, opt, cfg)
        trace.append(value)
    # counts cover the training epochs only; the evaluation pass below also hits the cache
    counts = (model.cache.hits, model.cache.misses) if getattr(model, "cache", None) else (0, 0)
    scores = model.logits(split.test_src, split.test_dst).data.copy()
    if not np.all(np.isfinite(scores)):
        raise DivergenceError("non-finite test scores after training", epoch=cfg.epochs)
    run = TrainRun(
        config=cfg.to_dict(), seed=cfg.seed, loss_trace=trace,
        wall_clock=time.perf_counter() - start,
        params={g: ps.copy() for g, ps in model.groups().items()},
        test_scores=scores, test_signs=split.test_sign.copy(),
    )
    if model.hcim is not None:
        run.interpretability = model.hcim.interpretability()
        run.cache_hits, run.cache_misses = counts
    return run


def with_model(cfg: TrainConfig, model: str) -> TrainConfig:
    return replace(cfg, model=model)
