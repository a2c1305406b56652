"""Link-sign metrics over scored test edges (positive sign = positive class)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ShapeError, UndefinedMetricError


@dataclass(frozen=True)
class ScoredEdges:
    scores: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).ravel()
        y = np.asarray(self.signs).ravel().astype(np.int64)
        if s.size != y.size:
            raise ShapeError(f"{s.size} scores but {y.size} signs")
        if s.size == 0:
            raise ShapeError("no scored edges")
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("signs must be +1 or -1")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "signs", y)

    def __len__(self):
        return self.scores.size


def _coerce(s, signs=None) -> ScoredEdges:
    if isinstance(s, ScoredEdges):
        return s
    return ScoredEdges(s, signs)


def auc(s, signs=None) -> float:
    """Mann-Whitney AUC with ties counted one half."""
    s = _coerce(s, signs)
    pos = s.signs > 0
    if pos.all() or not pos.any():
        raise UndefinedMetricError("AUC needs at least one positive and one negative edge")
    return float(_kernels.mann_whitney_auc(s.scores, pos))


def f1(s, signs=None, threshold: float = 0.0) -> float:
    s = _coerce(s, signs)
    actual = s.signs > 0
    if not actual.any():
        raise UndefinedMetricError("F1 undefined: no positive edges")
    pred = s.scores > threshold
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    fn = int(np.sum(~pred & actual))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def precision_at_k(s, signs=None, k: int = 100) -> float:
    """Share of positive signs among the ``min(k, len)`` highest scores (stable on ties)."""
    s = _coerce(s, signs)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    top = np.argsort(-s.scores, kind="stable")[:min(k, len(s))]
    return float(np.mean(s.signs[top] > 0))


def evaluate(s, signs=None, k: int = 100) -> dict:
    s = _coerce(s, signs)
    return {"auc": auc(s), "f1": f1(s), "p_at_k": precision_at_k(s, k=k),
            "k_clamped": len(s) < k}
