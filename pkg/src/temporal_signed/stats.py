"""Paired significance testing and multi-seed aggregation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericError, ShapeError

DEGENERATE_VARIANCE = "degenerate-variance"
ERROR_REDUCTION_UNDEFINED = "error-reduction-undefined"
RELATIVE_IMPROVEMENT_UNDEFINED = "relative-improvement-undefined"

_CF_MAX_ITER = 300
_CF_EPS = 1e-15
_TINY = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges quickly on the side of the mode
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def _two_sided_tail(t: float, df: float) -> float:
    # P(|T| > |t|) = I_x(df/2, 1/2) with x = df/(df+t^2); near t = 0 x rounds to 1,
    # so the complement I_y(1/2, df/2) with y = t^2/(df+t^2) is evaluated instead
    t2 = t * t
    x = df / (df + t2)
    if x > 0.5:
        return 1.0 - regularized_incomplete_beta(0.5, df / 2.0, t2 / (df + t2))
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def t_cdf(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * _two_sided_tail(t, df)
    return 1.0 - tail if t > 0 else tail


def t_two_sided_p(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return min(1.0, _two_sided_tail(t, df))


@dataclass(frozen=True)
class TTest:
    t: float
    p: float
    df: int
    flags: tuple = ()

    def __iter__(self):
        return iter((self.t, self.p))


def paired_t_test(a, b) -> TTest:
    """Two-sided paired t-test on ``a - b``."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ShapeError(f"paired samples differ in length ({a.size} vs {b.size})")
    if a.size < 2:
        raise ShapeError("paired t-test needs at least two pairs")
    d = a - b
    n = d.size
    if np.all(d == 0):
        return TTest(0.0, 1.0, n - 1)
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        return TTest(math.copysign(math.inf, mean), 0.0, n - 1, (DEGENERATE_VARIANCE,))
    t = mean / (sd / math.sqrt(n))
    return TTest(t, t_two_sided_p(t, n - 1), n - 1)


def standard_error(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise ShapeError("standard error needs at least two values")
    return float(np.std(x, ddof=1) / math.sqrt(x.size))


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.05:
        return "*"
    return ""


def relative_improvement(m_base: float, m_enh: float) -> float:
    """(m_enh - m_base) / m_base; NaN when the baseline is zero."""
    if m_base == 0.0:
        return math.nan
    return (m_enh - m_base) / m_base


def error_reduction(m_base: float, m_enh: float) -> float:
    """Relative shrinkage of (1 - metric); NaN when the baseline is already perfect."""
    if m_base == 1.0:
        return math.nan
    return ((1.0 - m_base) - (1.0 - m_enh)) / (1.0 - m_base)


@dataclass
class MetricSummary:
    metric: str
    n: int
    baseline_mean: float
    baseline_se: float
    enhanced_mean: float
    enhanced_se: float
    t: float
    p: float
    stars: str
    relative_improvement: float
    error_reduction: float
    flags: list = field(default_factory=list)

    @property
    def relative_improvement_pct(self) -> float:
        return 100.0 * self.relative_improvement

    @property
    def error_reduction_pct(self) -> float:
        return 100.0 * self.error_reduction


@dataclass
class EvalReport:
    per_seed: list          # dicts: seed, model, metric values
    summaries: dict         # metric -> MetricSummary
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"per_seed": self.per_seed,
                "summaries": {k: asdict(v) for k, v in self.summaries.items()},
                "flags": list(self.flags)}

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        return cls(doc["per_seed"], {k: MetricSummary(**v) for k, v in doc["summaries"].items()},
                   list(doc.get("flags", [])))


def summarize_metric(metric: str, base, enh) -> MetricSummary:
    base = np.asarray(base, dtype=np.float64)
    enh = np.asarray(enh, dtype=np.float64)
    test = paired_t_test(enh, base)
    mb, me = float(np.mean(base)), float(np.mean(enh))
    flags = list(test.flags)
    ri, er = relative_improvement(mb, me), error_reduction(mb, me)
    if math.isnan(ri):
        flags.append(RELATIVE_IMPROVEMENT_UNDEFINED)
    if math.isnan(er):
        flags.append(ERROR_REDUCTION_UNDEFINED)
    return MetricSummary(metric, int(base.size), mb, standard_error(base), me, standard_error(enh),
                         test.t, test.p, significance_stars(test.p),
                         ri, er, flags)


def summarize(baseline: dict, enhanced: dict, seeds=None, flags=()) -> EvalReport:
    """Aggregate per-seed metrics (metric -> sequence, paired by position)."""
    if set(baseline) != set(enhanced):
        raise ShapeError("baseline and enhanced report different metrics")
    sizes = {len(v) for v in baseline.values()} | {len(v) for v in enhanced.values()}
    if len(sizes) != 1:
        raise ShapeError("every metric needs the same number of paired seeds")
    n = sizes.pop()
    if n < 2:
        raise ShapeError("summaries need at least two seeds")
    seeds = list(range(n)) if seeds is None else list(seeds)
    rows = []
    for i, seed in enumerate(seeds):
        for model, src in (("baseline", baseline), ("enhanced", enhanced)):
            rows.append({"seed": int(seed), "model": model,
                         **{m: float(src[m][i]) for m in sorted(src)}})
    summaries = {m: summarize_metric(m, baseline[m], enhanced[m]) for m in sorted(baseline)}
    return EvalReport(rows, summaries, list(flags))
