import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from epipolicy.econ import (
    REFERENCE_IND,
    GdpModel,
    betainc,
    fit_cubic,
    gdp_bounds,
    min_max_normalize,
    pearson_stats,
    predict_gdp,
    quarter_bounds,
    quarterly_pairs,
    quarterly_to_daily,
    student_t_two_sided,
)
from epipolicy.errors import DomainError, FitError

from oracles import permutation_p_value, power_sum


def test_quarterly_to_daily_constant_and_midpoint():
    out = quarterly_to_daily([("2021-Q1", 100.0), ("2021-Q2", 100.0), ("2021-Q3", 100.0)])
    assert np.all(out.values == 100.0)
    two = quarterly_to_daily([("2021-Q1", 100.0), ("2021-Q3", 102.0)])
    # anchors at Feb 14.5 and Aug 15.5; their midpoint falls between May 16 and May 17
    k = dt.date(2021, 5, 16).toordinal() - two.start_date.toordinal()
    assert (two.values[k] + two.values[k + 1]) / 2 == pytest.approx(101.0, abs=1e-9)
    with pytest.raises(DomainError):
        quarterly_to_daily([])
    with pytest.raises(DomainError):
        quarterly_to_daily([("2021-Q2", 1.0), ("2021-Q1", 1.0)])


def test_quarterly_to_daily_repeat_and_flat_ends():
    q = [("2021-Q1", 99.0), ("2021-Q2", 101.0)]
    rep = quarterly_to_daily(q, repeat=True)
    assert rep.values[0] == 99.0 and rep.values[-1] == 101.0
    lin = quarterly_to_daily(q, dt.date(2020, 12, 1), dt.date(2021, 9, 30))
    assert lin.values[0] == 99.0 and lin.values[-1] == 101.0


def _quarter_mean_errors(daily, quarters):
    days = daily.start_date.toordinal() + np.arange(len(daily))
    out = {}
    for label, value in quarters:
        first, last = quarter_bounds(int(label[:4]), int(label[-1]))
        mask = (days >= first.toordinal()) & (days <= last.toordinal())
        if mask.sum() == (last - first).days + 1:
            out[label] = daily.values[mask].mean() / value - 1
    return out


def test_interpolation_preserves_means_of_linear_trend():
    quarters = [(f"{2020 + k // 4}-Q{k % 4 + 1}", 95.0 + 0.7 * k) for k in range(10)]
    errs = _quarter_mean_errors(quarterly_to_daily(quarters), quarters[1:-1])
    assert max(abs(e) for e in errs.values()) < 2e-4


@pytest.mark.xfail(
    strict=True,
    reason="bundled surrogate GDP zig-zags between quarters; midpoint-anchored linear "
    "interpolation then misses quarter means by up to 0.73%",
)
def test_bundled_daily_gdp_preserves_quarter_means(bundle):
    errs = _quarter_mean_errors(bundle.gdp_daily, bundle.gdp_quarterly)
    assert max(abs(e) for e in errs.values()) <= 0.005


def test_fit_cubic_exact_polynomial():
    s = np.linspace(0, 100, 25)
    y = 2 * s**3 - s + 5
    m = fit_cubic(s, y)
    assert m.a == pytest.approx(2.0, rel=1e-6)
    assert m.b == pytest.approx(0.0, abs=1e-6)
    assert m.c == pytest.approx(-1.0, rel=1e-6)
    assert m.d == pytest.approx(5.0, rel=1e-6)
    assert np.allclose(predict_gdp(m, s), y, rtol=1e-9)


def test_fit_cubic_degenerate_cases():
    s = np.linspace(0, 100, 10)
    m = fit_cubic(s, np.full(10, 98.0))
    assert (m.a, m.b, m.c, m.d) == (0.0, 0.0, 0.0, 98.0)
    assert m.r == 0.0 and m.p_value == 1.0 and m.degenerate
    with pytest.raises(FitError):
        fit_cubic(np.full(10, 40.0), np.arange(10.0))
    with pytest.raises(DomainError):
        fit_cubic([1, 2, 3], [1, 2, 3])


@given(
    coef=st.tuples(*(st.floats(-1, 1) for _ in range(4))),
    noise_seed=st.integers(0, 2**16),
)
def test_fit_cubic_residuals_orthogonal(coef, noise_seed):
    rng = np.random.default_rng(noise_seed)
    s = np.sort(rng.uniform(0, 100, 30))
    u = s / 100
    y = coef[0] * u**3 + coef[1] * u**2 + coef[2] * u + coef[3] + rng.normal(0, 0.1, s.size)
    m = fit_cubic(s, y)
    resid = y - predict_gdp(m, s)
    for col in (np.ones_like(u), u, u**2, u**3):
        assert abs(resid @ col) <= 1e-6 * np.linalg.norm(col) * max(1.0, np.linalg.norm(y))


def test_predict_gdp_examples():
    assert predict_gdp(REFERENCE_IND, 0.0) == pytest.approx(101.357226, abs=1e-9)
    assert predict_gdp(GdpModel(0.0, 0.0, 0.0, 100.0), 37.0) == 100.0
    horner = predict_gdp(REFERENCE_IND, 50.0)
    assert horner == pytest.approx(power_sum(REFERENCE_IND.coefficients, 50.0), rel=1e-12)
    with pytest.raises(DomainError):
        predict_gdp(REFERENCE_IND, 100.5)


@given(s=st.floats(0.0, 100.0))
def test_horner_matches_power_sum(s):
    assert predict_gdp(REFERENCE_IND, s) == pytest.approx(power_sum(REFERENCE_IND.coefficients, s), rel=1e-12)


def test_pearson_exact_lines():
    x = np.arange(10.0)
    r, r2, p = pearson_stats(x, 2 * x + 1)
    assert r == pytest.approx(1.0) and r2 == pytest.approx(1.0) and p < 1e-12
    r, _, _ = pearson_stats(x, -x)
    assert r == pytest.approx(-1.0)
    with pytest.raises(DomainError):
        pearson_stats([1, 2], [2, 3])
    with pytest.raises(DomainError):
        pearson_stats([1, 1, 1], [1, 2, 3])


def test_pearson_p_value_matches_permutation_oracle():
    rng = np.random.default_rng(2024)
    x, y = rng.uniform(size=200), rng.uniform(size=200)
    _, _, p = pearson_stats(x, y)
    assert abs(p - permutation_p_value(x, y, 100000, seed=1)) <= 0.02


@given(
    a=st.floats(0.1, 10), b=st.floats(-10, 10), flip=st.booleans(), seed=st.integers(0, 1000)
)
def test_pearson_affine_invariance(a, b, flip, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=20)
    y = x + rng.normal(size=20)
    r, _, _ = pearson_stats(x, y)
    r2, _, _ = pearson_stats(a * x + b, -y if flip else y)
    assert r2 == pytest.approx(-r if flip else r, abs=1e-12)


def test_betainc_and_t_against_scipy():
    from scipy import special, stats

    for a, b, x in [(0.5, 0.5, 0.3), (2.0, 5.0, 0.1), (10.0, 0.5, 0.99), (1.0, 1.0, 0.42)]:
        assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), rel=1e-10)
    for t, df in [(0.5, 3), (2.0, 10), (-4.0, 50)]:
        assert student_t_two_sided(t, df) == pytest.approx(2 * stats.t.sf(abs(t), df), rel=1e-9)


def test_min_max_normalize():
    assert min_max_normalize(2.0, 2.0, 4.0) == 0.0
    assert min_max_normalize(4.0, 2.0, 4.0) == 1.0
    assert min_max_normalize(3.0, 2.0, 4.0) == 0.5
    assert min_max_normalize(5.0, 2.0, 4.0) == 1.0
    with pytest.raises(DomainError):
        min_max_normalize(1.0, 2.0, 2.0)


def test_gdp_bounds_cover_integer_grid():
    lo, hi = gdp_bounds(REFERENCE_IND)
    vals = [predict_gdp(REFERENCE_IND, float(s)) for s in range(101)]
    assert (lo, hi) == (min(vals), max(vals))


def test_quarterly_pairs_partial_quarters():
    start = dt.date(2020, 5, 1)
    s = np.concatenate([np.full(61, 80.0), np.full(92, 50.0)])
    xs, ys = quarterly_pairs(start, s, [("2020-Q1", 90.0), ("2020-Q2", 95.0), ("2020-Q3", 99.0)])
    assert xs.tolist() == [80.0, 50.0] and ys.tolist() == [95.0, 99.0]
    with pytest.raises(DomainError):
        quarterly_pairs(start, s, [("2019-Q1", 90.0)])
