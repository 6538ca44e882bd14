import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from gexprobe.errors import DegenerateGroups, SingularDesign, StatsError
from gexprobe.llm_harness.parsing import DetectionResult
from gexprobe.stats_validator import (AlphaInputs, Differencing, binomial_test, bonferroni, bootstrap_rate,
                                      cochran_armitage, detection_rate, exact_power, granger, net_alpha,
                                      normal_approx_n, pearson, power_analysis, wilson_ci)

# P(X >= k | n, 1/2) at 40 digits, frozen from oracles.binom_tail
TAILS = {
    (168, 242): 7.0685321801653119514e-10,
    (121, 242): 0.52561850207618918126,
    (163, 242): 3.5585587466937119961e-8,
    (188, 242): 7.5245867528901569123e-19,
    (519, 726): 4.4597057024439601378e-32,
    (5, 10): 0.623046875,
}


def dets(k, n):
    return [DetectionResult(str(i), True, None, "a", "b", "c", 80 if i < k else 10, "T+1") for i in range(n)]


@pytest.mark.parametrize("k,n", sorted(TAILS))
def test_binomial_against_frozen_tail(k, n):
    assert binomial_test(k, n, 0.5) == pytest.approx(TAILS[(k, n)], rel=1e-9)


def test_frozen_tails_match_live_oracle():
    for (k, n), v in TAILS.items():
        assert float(oracles.binom_tail(k, n, 0.5)) == pytest.approx(v, rel=1e-15)


def test_binomial_edges():
    assert binomial_test(0, 10, 0.5) == 1.0
    assert binomial_test(168, 242, 0.5) < 0.001
    assert binomial_test(10, 10, 0.5) == pytest.approx(2 ** -10)


def test_bonferroni():
    assert round(bonferroni(0.05, 3), 4) == 0.0167
    assert bonferroni(0.05, 1) == 0.05
    assert bonferroni(0.01, 4) == pytest.approx(0.0025)
    with pytest.raises(ValueError):
        bonferroni(0.05, 0)


def test_wilson_frozen_values():
    assert wilson_ci(168, 242) == pytest.approx((0.6335064321541823, 0.7488538111136525), abs=1e-15)
    assert wilson_ci(519, 726) == pytest.approx((0.6809714018116062, 0.7465187006335763), abs=1e-15)
    lo, hi = wilson_ci(0, 242)
    assert lo == 0.0 and hi == pytest.approx(0.01562575669344655, abs=1e-15)


def test_detection_rate_examples():
    r = detection_rate(dets(168, 242), 242)
    assert round(100 * r.rate, 1) == 69.4 and r.successes == 168
    assert detection_rate(dets(0, 242), 242).rate == 0.0
    assert round(100 * detection_rate(dets(519, 726), 726).rate, 1) == 71.5
    with pytest.raises(ValueError):
        detection_rate([], 0)


@given(k=st.integers(0, 400), extra=st.integers(0, 400))
def test_wilson_contains_point(k, extra):
    n = k + extra
    if n == 0:
        return
    lo, hi = wilson_ci(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


def test_wilson_width_shrinks_with_n():
    widths = [np.subtract(*wilson_ci(7 * m, 10 * m)[::-1]) for m in (1, 2, 5, 10, 50)]
    assert all(a > b for a, b in zip(widths, widths[1:]))


def test_bootstrap_all_true():
    r = bootstrap_rate([True] * 50, 500, seed=1)
    assert r.mean == 1.0 and r.stdev == 0.0


def test_bootstrap_matches_analytic_stdev():
    flags = [True] * 173 + [False] * 69  # 0.715 of 242
    r = bootstrap_rate(flags, 10_000, seed=0)
    p = 173 / 242
    assert abs(r.stdev / math.sqrt(p * (1 - p) / 242) - 1) < 0.15


def test_bootstrap_bit_reproducible_and_worker_independent():
    flags = [bool(i % 3) for i in range(242)]
    a = bootstrap_rate(flags, 5000, seed=9)
    b = bootstrap_rate(flags, 5000, seed=9)
    c = bootstrap_rate(flags, 5000, seed=9, workers=4)
    assert a == b == c
    assert bootstrap_rate(flags, 5000, seed=10) != a


def test_bootstrap_validation():
    with pytest.raises(ValueError):
        bootstrap_rate([], 10)
    with pytest.raises(ValueError):
        bootstrap_rate([True], 0)


def test_power_small_effect_and_extreme():
    assert power_analysis(0.999, 0.5, 0.05, 0.8).n_exact <= 10
    assert power_analysis(0.999, 0.5, 0.05, 0.8).n_exact == 5


def test_power_eighty_percent_band():
    r = power_analysis(0.70, 0.50, 0.05, 0.80)
    assert 25 <= r.n_exact <= 40
    assert r.achieved_power >= 0.80
    assert 25 <= r.n_normal <= 40


def test_power_result_is_first_crossing():
    r = power_analysis(0.70, 0.50, 0.05, 0.80)
    assert all(exact_power(n, 0.7, 0.5, 0.05)[0] < 0.80 for n in range(1, r.n_exact))


def test_exact_power_critical_value_is_level_alpha():
    pw, c = exact_power(30, 0.7, 0.5, 0.05)
    assert binomial_test(c, 30) <= 0.05 < binomial_test(c - 1, 30)
    assert 0 < pw < 1


def test_normal_approx_formula():
    z = (1.6448536269514722, 0.8416212335729143)
    p0, p1 = 0.5, 0.7
    ref = ((z[0] * math.sqrt(p0 * (1 - p0)) + z[1] * math.sqrt(p1 * (1 - p1))) / (p1 - p0)) ** 2
    assert normal_approx_n(p1, p0, 0.05, 0.80) == math.ceil(ref)


def test_power_validation():
    with pytest.raises(ValueError):
        power_analysis(0.4, 0.5)


def test_trend_identical_rates():
    r = cochran_armitage([(30, 100)] * 4)
    assert abs(r.z) < 1e-12 and r.p_value == pytest.approx(1.0)


def test_trend_strong_increase_vs_permutation():
    groups = [(10, 100), (37, 100), (63, 100), (90, 100)]
    r = cochran_armitage(groups)
    assert r.p_value < 0.001 and r.z > 0
    assert oracles.permutation_trend_p(groups, shuffles=20_000) < 0.001


def test_trend_moderate_matches_permutation():
    groups = [(20, 50), (24, 50), (27, 50), (30, 50)]
    ref = oracles.permutation_trend_p(groups, shuffles=100_000, seed=1)
    assert cochran_armitage(groups).p_value == pytest.approx(ref, abs=0.01)


def test_trend_errors():
    with pytest.raises(DegenerateGroups):
        cochran_armitage([(0, 0), (0, 0)])
    with pytest.raises(ValueError):
        cochran_armitage([(1, 2)])


def _coupled(seed, n=250, coef=0.8):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = np.zeros(n)
    y[2:] = coef * x[:-2]
    return x, y + rng.standard_normal(n)


def test_granger_detects_lag_two():
    x, y = _coupled(7)
    r = granger(x, y, 2)
    assert r.p_value < 0.01 and r.significant(0.01)


def test_granger_matches_normal_equations():
    x, y = _coupled(8)
    for lag in (1, 2, 3):
        r = granger(x, y, lag)
        f, df = oracles.granger_f(x, y, lag)
        assert r.f_stat == pytest.approx(f, rel=1e-8) and r.df_den == df


def test_granger_white_noise_calibrated():
    rng = np.random.default_rng(2024)
    passes = sum(granger(rng.standard_normal(250), rng.standard_normal(250), 2).p_value > 0.05
                 for _ in range(100))
    assert passes >= 90


def test_granger_identical_series_guarded():
    x, _ = _coupled(1)
    with pytest.raises(SingularDesign):
        granger(x, x, 2)


def test_granger_input_checks():
    with pytest.raises(ValueError):
        granger(np.zeros(5), np.zeros(5), 2)
    with pytest.raises(ValueError):
        granger(np.zeros(50), np.zeros(49), 1)
    with pytest.raises(SingularDesign):
        granger(np.ones(50), np.arange(50.0), 1)


def test_granger_diff_form():
    x, y = _coupled(3)
    lvl = granger(np.cumsum(x), np.cumsum(y), 2, Differencing.DIFF)
    ref = granger(x[1:], y[1:], 2)
    assert lvl.f_stat == pytest.approx(ref.f_stat, rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), lag=st.integers(1, 4))
def test_granger_f_nonnegative_and_extra_lag_helps_fit(seed, lag):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(120), rng.standard_normal(120)
    r = granger(x, y, lag)
    assert r.f_stat >= 0 and r.rss_unrestricted <= r.rss_restricted
    # an extra x lag on the same sample can only lower the unrestricted RSS
    n = 120
    rows = range(lag + 1, n)
    base = np.array([[1.0] + [y[t - j] for j in range(1, lag + 1)] + [x[t - j] for j in range(1, lag + 1)]
                     for t in rows])
    more = np.column_stack([base, [x[t - lag - 1] for t in rows]])
    target = np.array([y[t] for t in rows])
    assert oracles.ols_rss(more, target) <= oracles.ols_rss(base, target) + 1e-9


def test_pearson_extremes_and_noise():
    x = np.arange(10.0)
    assert pearson(x, x).r == pytest.approx(1.0)
    assert pearson(x, -x).r == pytest.approx(-1.0)
    rng = np.random.default_rng(5)
    small = sum(abs(pearson(rng.standard_normal(242), rng.standard_normal(242)).r) < 0.15 for _ in range(50))
    assert small >= 45
    with pytest.raises(StatsError):
        pearson(np.ones(5), x[:5])
    with pytest.raises(ValueError):
        pearson(x[:2], x[:2])


def test_net_alpha_examples():
    assert net_alpha(AlphaInputs([0.01, -0.02], [0.01, -0.02], 0.0)) == 0.0
    a = net_alpha(AlphaInputs([0.001] * 4, [0.0002] * 4, 0.0005, trades=4))
    assert a == pytest.approx(0.0003, abs=1e-15)
    assert AlphaInputs([0.0], [0.0]).tc_per_trade == 0.0005
    with pytest.raises(ValueError):
        net_alpha(AlphaInputs([], [0.0]))
    with pytest.raises(ValueError):
        AlphaInputs([0.0], [0.0], -0.1)
