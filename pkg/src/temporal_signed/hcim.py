"""Historical Context Integration Module.

Pipeline over a window of ``T`` historical embeddings ``Z(0) .. Z(T-1)``
(index ``T-1`` is the most recent) and the current embeddings ``Z_cur``::

    w_tau   = lam^(T-1-tau) * exp(tau/gamma) / (sum_i lam^(T-1-i) * exp(i/gamma) + eps)
    H_seq   = stack_tau(w_tau * Z(tau))                      n x T x d
    H_lstm  = LSTM(H_seq)                                    n x T x h
    H_attn  = MultiHeadSelfAttention_T(H_lstm)               n x T x h
    H_ctx   = H_attn[:, T-1, :] Wp + bp                      n x d
    Z_enh   = (1 - alpha) * Z_cur + alpha * H_ctx            global fusion
    Z_enh   = (1 - a) . Z_cur + a . H_ctx,
              a = sigmoid(MLP([Z_cur || H_ctx]))             node-adaptive fusion

Constrained scalars are stored unconstrained: ``lam = sigmoid(raw_lambda)``,
``gamma = softplus(raw_gamma) + 1e-3``, ``alpha = sigmoid(raw_alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, stable_sigmoid, stable_softplus
from .errors import ConfigError, DomainError, NumericError, ShapeError, StateError
from .params import ParamSet, xavier

EPSILON = 1e-8
GAMMA_FLOOR = 1e-3
GLOBAL, ADAPTIVE = "global", "adaptive"
STAGES = ("weighting", "lstm", "attention")


@dataclass(frozen=True)
class HcimConfig:
    embed_dim: int
    hidden_dim: int | None = None
    num_heads: int = 1
    fusion: str = GLOBAL
    mlp_hidden: int | None = None
    epsilon: float = EPSILON
    # test hooks: stages replaced by identity; never set on the production path
    bypass: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.fusion not in (GLOBAL, ADAPTIVE):
            raise ConfigError(f"fusion must be 'global' or 'adaptive', got {self.fusion!r}")
        if self.h % self.num_heads:
            raise ConfigError(f"hidden size {self.h} not divisible by {self.num_heads} heads")
        unknown = set(self.bypass) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown bypass stages {sorted(unknown)}")
        if ({"lstm", "attention"} & set(self.bypass)) and self.h != self.embed_dim:
            raise ConfigError("bypassing lstm/attention requires hidden_dim == embed_dim")

    @property
    def h(self) -> int:
        return self.hidden_dim or self.embed_dim

    @property
    def mlp_dim(self) -> int:
        return self.mlp_hidden or self.embed_dim


def init_hcim(cfg: HcimConfig, rng: np.random.Generator) -> ParamSet:
    d, h = cfg.embed_dim, cfg.h
    p = ParamSet()
    p.add("raw_lambda", np.array(0.0))
    p.add("raw_gamma", np.array(math.log(math.expm1(1.0 - GAMMA_FLOOR))))
    p.add("lstm.wx", xavier(rng, d, 4 * h))
    p.add("lstm.wh", xavier(rng, h, 4 * h))
    p.add("lstm.b", np.zeros(4 * h))
    for m in ("wq", "wk", "wv", "wo"):
        p.add("attn." + m, xavier(rng, h, h))
    p.add("attn.bo", np.zeros(h))
    p.add("proj.w", xavier(rng, h, d))
    p.add("proj.b", np.zeros(d))
    if cfg.fusion == GLOBAL:
        p.add("raw_alpha", np.array(0.0))
    else:
        m = cfg.mlp_dim
        p.add("mlp.w1", xavier(rng, 2 * d, m))
        p.add("mlp.b1", np.zeros(m))
        p.add("mlp.w2", xavier(rng, m, d))
        p.add("mlp.b2", np.zeros(d))
    return p


def constrained(params) -> dict:
    """Current lambda, gamma and (global mode) alpha values."""
    out = {
        "lambda": float(stable_sigmoid(params["raw_lambda"].data)),
        "gamma": float(stable_softplus(params["raw_gamma"].data) + GAMMA_FLOOR),
    }
    if "raw_alpha" in params:
        out["alpha"] = float(stable_sigmoid(params["raw_alpha"].data))
    return out


# ---------------------------------------------------------------------------
# stage 1
# ---------------------------------------------------------------------------

def temporal_weights(T: int, lam: float, gamma: float, eps: float = EPSILON) -> np.ndarray:
    """Recency weights for positions 0..T-1, evaluated in log space."""
    if T < 1:
        raise DomainError(f"T must be >= 1, got {T}")
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    if not gamma > 0.0:
        raise DomainError(f"gamma must be > 0, got {gamma}")
    if not eps > 0.0:
        raise DomainError(f"epsilon must be > 0, got {eps}")
    tau = np.arange(T, dtype=np.float64)
    logs = (T - 1 - tau) * math.log(lam) + tau / gamma
    m = logs.max()
    num = np.exp(logs - m)
    w = num / (num.sum() + eps * math.exp(-m))
    # The exact sum N/(N+eps) is < 1, but once eps/N drops below half an ulp the
    # rounded weights can sum to 1. Round the largest weight toward zero until
    # the stored values keep the strict bound (each step moves it one ulp).
    while w.sum() >= 1.0 or math.fsum(w) >= 1.0:
        w[-1] = np.nextafter(w[-1], 0.0)
    return w


def weights_from_raw(raw_lambda: Tensor, raw_gamma: Tensor, T: int, eps: float = EPSILON) -> Tensor:
    """Differentiable version of :func:`temporal_weights` from unconstrained scalars."""
    tau = np.arange(T, dtype=np.float64)
    log_lam = ad.log_sigmoid(raw_lambda)
    inv_gamma = ad.reciprocal(ad.softplus(raw_gamma) + GAMMA_FLOOR)
    logs = log_lam * (T - 1 - tau) + inv_gamma * tau
    # m is a constant shift; the expression equals the unshifted formula exactly
    m = float(logs.data.max())
    num = ad.exp(logs - m)
    return num / (ad.tsum(num) + eps * math.exp(-m))


def apply_weights(history, w):
    """Scale each window entry by its weight; returns the stacked n x T x d tensor."""
    w = ad.as_tensor(w)
    if len(history) != w.shape[0]:
        raise ShapeError(f"{len(history)} snapshots but {w.shape[0]} weights")
    seq = ad.stack([ad.as_tensor(z) for z in history], axis=1)
    return seq * ad.reshape(w, (1, -1, 1))


# ---------------------------------------------------------------------------
# stage 2
# ---------------------------------------------------------------------------

@dataclass
class LstmState:
    hidden: np.ndarray
    cell: np.ndarray


def lstm_forward(h_seq, params):
    """Single-layer LSTM along axis 1 of an n x T x d input; gate order i, f, g, o."""
    h_seq = ad.as_tensor(h_seq)
    n, T, _ = h_seq.shape
    wx, wh, b = params["lstm.wx"], params["lstm.wh"], params["lstm.b"]
    hdim = wh.shape[0]
    h = ad.Tensor(np.zeros((n, hdim)))
    c = ad.Tensor(np.zeros((n, hdim)))
    # input projection for all steps at once
    xproj = h_seq @ wx + b
    outs = []
    for t in range(T):
        z = xproj[:, t, :] + h @ wh
        i = ad.sigmoid(z[:, :hdim])
        f = ad.sigmoid(z[:, hdim:2 * hdim])
        g = ad.tanh(z[:, 2 * hdim:3 * hdim])
        o = ad.sigmoid(z[:, 3 * hdim:])
        c = f * c + i * g
        h = o * ad.tanh(c)
        if not (np.all(np.isfinite(h.data)) and np.all(np.isfinite(c.data))):
            raise NumericError(f"non-finite LSTM state at step {t}")
        outs.append(h)
    return ad.stack(outs, axis=1), LstmState(h.data, c.data)


# ---------------------------------------------------------------------------
# stage 3
# ---------------------------------------------------------------------------

def temporal_attention(h_lstm, params, num_heads: int):
    """Per-node multi-head self-attention across the T axis (no mask)."""
    h_lstm = ad.as_tensor(h_lstm)
    n, T, hdim = h_lstm.shape
    if hdim % num_heads:
        raise ShapeError(f"hidden size {hdim} not divisible by {num_heads} heads")
    dh = hdim // num_heads

    def heads(x):
        x = ad.reshape(x, (n, T, num_heads, dh))
        return ad.reshape(ad.transpose(x, (0, 2, 1, 3)), (n * num_heads, T, dh))

    q = heads(h_lstm @ params["attn.wq"])
    k = heads(h_lstm @ params["attn.wk"])
    v = heads(h_lstm @ params["attn.wv"])
    att, probs = ad.attention(q, k, v, Tensor(np.zeros((T, T))), 1.0 / math.sqrt(dh))
    att = ad.transpose(ad.reshape(att, (n, num_heads, T, dh)), (0, 2, 1, 3))
    return ad.reshape(att, (n, T, hdim)) @ params["attn.wo"] + params["attn.bo"]


def project_context(h_attn, params):
    h_attn = ad.as_tensor(h_attn)
    return h_attn[:, h_attn.shape[1] - 1, :] @ params["proj.w"] + params["proj.b"]


# ---------------------------------------------------------------------------
# fusion
# ---------------------------------------------------------------------------

def _mix(z, h, a):
    # z + a (h - z) when a <= 1/2, h + (1 - a)(z - h) otherwise: algebraically
    # (1-a) z + a h, but exact at a in {0, 1}, at z == h, and never outside [z, h].
    a_b = np.broadcast_to(a, np.broadcast_shapes(np.shape(a), np.shape(z)))
    low = a_b <= 0.5
    return np.where(low, z + a_b * (h - z), h + (1.0 - a_b) * (z - h))


def convex_mix(z, h, a) -> Tensor:
    z, h, a = ad.as_tensor(z), ad.as_tensor(h), ad.as_tensor(a)
    if z.shape != h.shape:
        raise ShapeError(f"fusion inputs differ in shape: {z.shape} vs {h.shape}")
    out = _mix(z.data, h.data, a.data)

    def back(g):
        return (g * (1.0 - a.data), g * a.data,
                ad._unbroadcast(g * (h.data - z.data), a.shape))

    return ad._op(out, (z, h, a), back)


def fuse_global(z_cur, h_ctx, alpha):
    """Eq. 7 with a single mixing weight ``alpha`` (a float in [0, 1] or a scalar Tensor)."""
    if not isinstance(alpha, Tensor) and not 0.0 <= float(alpha) <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    return convex_mix(z_cur, h_ctx, alpha)


def fuse_adaptive(z_cur, h_ctx, params):
    """Node- and feature-wise mixing weights from an MLP over [Z_cur || H_ctx]."""
    z_cur, h_ctx = ad.as_tensor(z_cur), ad.as_tensor(h_ctx)
    if z_cur.shape != h_ctx.shape:
        raise ShapeError(f"fusion inputs differ in shape: {z_cur.shape} vs {h_ctx.shape}")
    hidden = ad.tanh(ad.concat([z_cur, h_ctx], axis=1) @ params["mlp.w1"] + params["mlp.b1"])
    alpha_node = ad.sigmoid(hidden @ params["mlp.w2"] + params["mlp.b2"])
    return convex_mix(z_cur, h_ctx, alpha_node), alpha_node


# ---------------------------------------------------------------------------
# full module
# ---------------------------------------------------------------------------

@dataclass
class HcimTrace:
    """Everything recorded by one forward pass; consumed by :func:`hcim_backward`."""
    output: Tensor
    weights: Tensor
    h_seq: Tensor
    h_lstm: Tensor
    state: LstmState | None
    h_attn: Tensor
    h_ctx: Tensor
    alpha: Tensor
    z_cur: Tensor
    history: list
    params: object


def hcim_forward(history, z_cur, params, cfg: HcimConfig) -> HcimTrace:
    """Run the full module. Array inputs become differentiable leaves."""
    history = [z if isinstance(z, Tensor) else ad.parameter(z, name=f"history[{i}]")
               for i, z in enumerate(history)]
    z_cur = z_cur if isinstance(z_cur, Tensor) else ad.parameter(z_cur, name="z_cur")
    T = len(history)
    if T < 1:
        raise ShapeError("history window must hold at least one snapshot")
    n, d = z_cur.shape
    for t, z in enumerate(history):
        if z.shape != (n, d):
            raise ShapeError(f"history[{t}] has shape {z.shape}, expected {(n, d)}")
    if d != cfg.embed_dim:
        raise ShapeError(f"embeddings have width {d}, module expects {cfg.embed_dim}")

    if "weighting" in cfg.bypass:
        w = Tensor(np.ones(T))
    else:
        w = weights_from_raw(params["raw_lambda"], params["raw_gamma"], T, cfg.epsilon)
    h_seq = apply_weights(history, w)
    if "lstm" in cfg.bypass:
        h_lstm, state = h_seq, None
    else:
        h_lstm, state = lstm_forward(h_seq, params)
    h_attn = h_lstm if "attention" in cfg.bypass else temporal_attention(h_lstm, params, cfg.num_heads)
    h_ctx = project_context(h_attn, params)
    if cfg.fusion == GLOBAL:
        alpha = ad.sigmoid(params["raw_alpha"])
        out = fuse_global(z_cur, h_ctx, alpha)
    else:
        out, alpha = fuse_adaptive(z_cur, h_ctx, params)
    return HcimTrace(out, w, h_seq, h_lstm, state, h_attn, h_ctx, alpha, z_cur, history, params)


def hcim_backward(trace: HcimTrace | None, grad_out) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of ``sum(grad_out * Z_enh)``.

    Returns one entry per parameter name plus ``"z_cur"`` and
    ``"history[t]"`` for every window position.
    """
    if trace is None:
        raise StateError("hcim_backward called before hcim_forward")
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != trace.output.shape:
        raise ShapeError(f"gradient shape {grad_out.shape} != output shape {trace.output.shape}")
    leaves = dict(trace.params.items())
    leaves["z_cur"] = trace.z_cur
    for t, z in enumerate(trace.history):
        leaves[f"history[{t}]"] = z
    for t in leaves.values():
        t.grad = None
    trace.output.backward(grad_out)
    return {k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
            for k, t in leaves.items()}


class HCIM:
    """Stateful wrapper: ``forward`` records a trace that ``backward`` consumes."""

    def __init__(self, params: ParamSet, cfg: HcimConfig):
        self.params = params
        self.cfg = cfg
        self._trace = None

    def forward(self, history, z_cur) -> Tensor:
        self._trace = hcim_forward(history, z_cur, self.params, self.cfg)
        return self._trace.output

    def backward(self, grad_out) -> dict[str, np.ndarray]:
        return hcim_backward(self._trace, grad_out)

    @property
    def trace(self) -> HcimTrace | None:
        return self._trace

    def interpretability(self) -> dict:
        out = constrained(self.params)
        if self.cfg.fusion == ADAPTIVE and self._trace is not None:
            a = self._trace.alpha.data
            per_node = a.mean(axis=1)
            out["alpha_node"] = {
                "mean": float(a.mean()), "min": float(a.min()), "max": float(a.max()),
                "per_node_mean": per_node.tolist(),
                "per_node_min": a.min(axis=1).tolist(),
                "per_node_max": a.max(axis=1).tolist(),
            }
        return out
