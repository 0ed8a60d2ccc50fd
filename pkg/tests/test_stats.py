import numpy as np
import pytest
from scipy import stats as sps

from bbfrag import stats
from bbfrag.errors import UndefinedStatistic


@pytest.fixture
def data():
    g = np.random.default_rng(4)
    x = g.normal(size=80)
    return x, 0.6 * x + g.normal(size=80)


def test_pearson_and_spearman_against_scipy(data):
    x, y = data
    assert stats.pearson_r(x, y) == pytest.approx(sps.pearsonr(x, y)[0], abs=1e-12)
    assert stats.pearson_r(np.column_stack([x, y])) == pytest.approx(stats.pearson_r(x, y))
    ties = np.round(x)
    assert stats.spearman_rank(ties, y) == pytest.approx(sps.spearmanr(ties, y)[0], abs=1e-12)


def test_ols_against_polyfit(data):
    x, y = data
    b, a = np.polyfit(x, y, 1)
    assert stats.ols_fit(x, y) == pytest.approx((a, b), abs=1e-12)


def test_undefined_cases():
    with pytest.raises(UndefinedStatistic):
        stats.pearson_r([1, 1, 1], [1, 2, 3])
    with pytest.raises(UndefinedStatistic):
        stats.ols_fit([2, 2], [1, 3])
    with pytest.raises(UndefinedStatistic):
        stats.pearson_r([1], [2])
    with pytest.raises(UndefinedStatistic):
        stats.median([])
    with pytest.raises(ValueError):
        stats.pearson_r([1, 2], [1, 2, 3])


def test_percentiles_are_linear_interpolation():
    v = [1, 2, 3, 4, 10]
    assert stats.median(v) == 3
    assert stats.percentiles(v, [25, 90]).tolist() == pytest.approx([2.0, 7.6])
    assert stats.iqr(v) == 2.0


def test_randomization_p_value_formula(data):
    x, y = data
    res = stats.randomization_test(x, y, K=200, rng=1)
    exceed = np.count_nonzero(np.abs(res.null_rs) >= abs(res.r_observed) - 1e-12)
    assert res.p_two_sided == (1 + exceed) / 201
    assert not res.reject_999  # K too small to support p < 0.001


def test_randomization_rejects_strong_correlation(data):
    x, y = data
    res = stats.randomization_test(x, y, K=999, rng=2)
    assert res.reject_999 and res.p_two_sided == 1 / 1000


def test_randomization_null_is_calibrated():
    g = np.random.default_rng(9)
    ps = [stats.randomization_test(g.normal(size=30), g.normal(size=30), K=99, rng=s).p_two_sided
          for s in range(300)]
    # uniform on {1/100, ..., 1}: about 5% at or below 0.05
    frac = np.mean(np.asarray(ps) <= 0.05)
    assert abs(frac - 0.05) < 4 * np.sqrt(0.05 * 0.95 / 300)


def test_randomization_shuffles_y_against_fixed_x():
    x = np.arange(6.0)
    y = np.array([3.0, 1, 4, 1, 5, 9])
    res = stats.randomization_test(x, y, K=50, rng=3)
    g = stats._as_rng(3)
    perms = np.argsort(g.random((50, 6)), axis=1)
    want = [np.corrcoef(x, y[p])[0, 1] for p in perms]
    assert res.null_rs == pytest.approx(want)


def test_bootstrap_interval(data):
    x, y = data
    ci = stats.bootstrap_ci_r(x, y, B=2000, rng=5)
    r = stats.pearson_r(x, y)
    assert ci.lo < r < ci.hi and ci.rs.size == 2000
    again = stats.bootstrap_ci_r(x, y, B=2000, rng=5)
    assert (ci.lo, ci.hi) == (again.lo, again.hi)
    assert np.quantile(ci.rs, 0.025) == pytest.approx(ci.lo)


def test_bootstrap_redraws_degenerate_samples():
    x = np.array([0.0, 0, 0, 1])
    y = np.array([1.0, 2, 3, 4])
    ci = stats.bootstrap_ci_r(x, y, B=300, rng=1)
    assert ci.resampled > 0 and np.isfinite(ci.rs).all()
    with pytest.raises(UndefinedStatistic):
        stats.bootstrap_ci_r([0.0, 1], [1.0, 1], B=10, rng=1)
