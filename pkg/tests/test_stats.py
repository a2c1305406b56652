import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special, stats as sps

from temporal_signed.errors import ShapeError
from temporal_signed.stats import (DEGENERATE_VARIANCE, ERROR_REDUCTION_UNDEFINED, EvalReport,
                                   error_reduction, paired_t_test, regularized_incomplete_beta,
                                   relative_improvement, significance_stars, standard_error,
                                   summarize, t_cdf, t_two_sided_p)


@given(st.floats(0.05, 60), st.floats(0.05, 60), st.floats(0, 1))
def test_incomplete_beta_matches_scipy(a, b, x):
    assert regularized_incomplete_beta(a, b, x) == pytest.approx(special.betainc(a, b, x),
                                                                 abs=1e-12)


@given(st.floats(-40, 40), st.integers(1, 200))
def test_t_distribution_matches_scipy(t, df):
    assert t_cdf(t, df) == pytest.approx(sps.t.cdf(t, df), abs=1e-12)
    assert t_two_sided_p(t, df) == pytest.approx(2 * sps.t.sf(abs(t), df), abs=1e-12)


def test_t_test_tabulated_example():
    res = paired_t_test([1, 2, 3], [0, 0, 0])
    assert res.t == pytest.approx(2 / (1 / math.sqrt(3)), abs=1e-12)
    assert res.df == 2
    assert res.p == pytest.approx(0.0742, abs=1e-3)
    assert res.p == pytest.approx(sps.ttest_rel([1, 2, 3], [0, 0, 0]).pvalue, abs=1e-12)


def test_t_test_conventions():
    assert tuple(paired_t_test([0.5, 0.7], [0.5, 0.7])) == (0.0, 1.0)
    deg = paired_t_test([2, 3, 4], [1, 2, 3])
    assert deg.p == 0.0 and deg.t == math.inf and DEGENERATE_VARIANCE in deg.flags
    with pytest.raises(ShapeError):
        paired_t_test([1, 2], [1, 2, 3])
    with pytest.raises(ShapeError):
        paired_t_test([1], [2])


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30), st.integers(0, 2**31))
def test_t_test_antisymmetric_and_matches_scipy(a, seed):
    a = np.array(a)
    b = a + np.random.default_rng(seed).normal(size=a.size)
    ab, ba = paired_t_test(a, b), paired_t_test(b, a)
    assert ab.t == -ba.t and ab.p == ba.p
    ref = sps.ttest_rel(a, b)
    assert ab.t == pytest.approx(ref.statistic, rel=1e-9)
    assert ab.p == pytest.approx(ref.pvalue, abs=1e-12)


def test_standard_error_and_stars():
    assert standard_error([1, 2, 3]) == pytest.approx(0.5774, abs=5e-5)
    assert [significance_stars(p) for p in (0.0005, 0.001, 0.01, 0.05, 0.2)] == \
        ["***", "*", "*", "", ""]


def test_derived_improvement_figures():
    assert relative_improvement(0.8890, 0.9226) == pytest.approx(0.0378, abs=1.5e-3)
    assert error_reduction(0.8890, 0.9226) == pytest.approx(0.3027, abs=1.5e-3)
    assert relative_improvement(0.7, 0.7) == 0.0 and error_reduction(0.7, 0.7) == 0.0
    assert math.isnan(error_reduction(1.0, 1.0))
    assert math.isnan(relative_improvement(0.0, 0.5))


@given(st.floats(0.01, 0.99), st.floats(0.01, 1.0))
def test_error_reduction_identity(mb, me):
    rel, err = relative_improvement(mb, me), error_reduction(mb, me)
    assert err == pytest.approx(rel * mb / (1 - mb), rel=1e-12, abs=1e-12)


def test_summarize_report():
    rep = summarize({"auc": [0.8, 0.82, 0.81], "f1": [0.9, 0.9, 0.9]},
                    {"auc": [0.85, 0.86, 0.88], "f1": [0.9, 0.9, 0.9]}, seeds=[3, 4, 5],
                    flags=["p_at_k-clamped"])
    s = rep.summaries["auc"]
    assert s.baseline_mean == pytest.approx(0.81) and s.enhanced_mean == pytest.approx(0.8633333)
    assert s.t > 0 and 0 <= s.p <= 1 and s.stars == significance_stars(s.p)
    assert rep.summaries["f1"].p == 1.0 and rep.summaries["f1"].relative_improvement == 0.0
    assert [r["seed"] for r in rep.per_seed] == [3, 3, 4, 4, 5, 5]
    assert EvalReport.from_dict(rep.to_dict()).to_dict() == rep.to_dict()
    assert rep.flags == ["p_at_k-clamped"]


def test_summarize_flags_perfect_baseline():
    s = summarize({"auc": [1.0, 1.0]}, {"auc": [1.0, 1.0]}).summaries["auc"]
    assert ERROR_REDUCTION_UNDEFINED in s.flags and math.isnan(s.error_reduction)


def test_summarize_validation():
    with pytest.raises(ShapeError):
        summarize({"auc": [1, 2]}, {"f1": [1, 2]})
    with pytest.raises(ShapeError):
        summarize({"auc": [1]}, {"auc": [1]})
    with pytest.raises(ShapeError):
        summarize({"auc": [1, 2]}, {"auc": [1, 2, 3]})
