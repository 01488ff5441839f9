import numpy as np
import pytest

from envwalk.stats import (
    InsufficientDataError,
    ScanCurve,
    bootstrap_se_mean,
    exponent_fit_coverage,
    fit_exponent,
    ks_gaussian_test,
    ks_null_calibration,
    ks_two_sample_critical,
    ks_two_sample_distance,
    with_fit,
)


def test_exact_power_law_recovered():
    grid = 2.0 ** np.arange(1, 9)
    for exponent in (0.5, 1.0):
        curve = ScanCurve(grid, grid**exponent, np.zeros_like(grid))
        fit = fit_exponent(curve)
        assert fit.exponent == pytest.approx(exponent, abs=1e-12)
        assert fit.ci_low <= exponent <= fit.ci_high


def test_fit_uses_only_significant_points():
    grid = np.array([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    est = grid.copy()
    se = np.zeros_like(grid)
    est[0] = 1e-6  # drowned in noise
    se[0] = 1.0
    fit = fit_exponent(ScanCurve(grid, est, se))
    assert fit.n_points == 5
    assert fit.exponent == pytest.approx(1.0, abs=1e-12)


def test_fit_insufficient_points():
    grid = np.array([1.0, 2.0, 4.0])
    with pytest.raises(InsufficientDataError):
        fit_exponent(ScanCurve(grid, grid, np.zeros_like(grid)))
    assert with_fit(ScanCurve(grid, grid, np.zeros_like(grid))).fit is None


def test_fit_ci_coverage_on_noisy_curves():
    coverage = exponent_fit_coverage(100, seed=88)
    assert coverage >= 0.90


def test_ks_accepts_its_own_reference():
    rng = np.random.default_rng(5)
    res = ks_gaussian_test(rng.normal(1.0, 2.0, size=10000), 1.0, 4.0)
    assert res.p_value > 0.01
    assert 0.0 <= res.statistic <= 1.0


def test_ks_rejects_constant_sample():
    res = ks_gaussian_test(np.full(200, 0.3), 0.0, 1.0)
    assert res.statistic >= 0.5
    assert res.p_value < 1e-10


def test_ks_rejects_uniform_as_gaussian():
    rng = np.random.default_rng(6)
    u = rng.uniform(0, 1, size=10000)
    res = ks_gaussian_test(u, 0.5, 1.0 / 12.0)
    assert res.p_value < 0.001


def test_ks_type_one_error_calibrated():
    rate = ks_null_calibration(400, 2000, seed=314)
    assert 0.005 <= rate <= 0.05


def test_ks_requires_samples_and_variance():
    with pytest.raises(InsufficientDataError):
        ks_gaussian_test(np.zeros(10), 0.0, 1.0)
    with pytest.raises(ValueError):
        ks_gaussian_test(np.zeros(100), 0.0, 0.0)


def test_two_sample_distance_and_critical():
    rng = np.random.default_rng(7)
    a = rng.normal(size=5000)
    b = rng.normal(size=5000)
    assert ks_two_sample_distance(a, b) < ks_two_sample_critical(5000, 5000, 0.01)
    c = rng.normal(1.0, 1.0, size=5000)
    assert ks_two_sample_distance(a, c) > ks_two_sample_critical(5000, 5000, 0.01)


def test_bootstrap_se_close_to_classic():
    rng = np.random.default_rng(8)
    x = rng.normal(size=1000)
    se = bootstrap_se_mean(x, 400, seed=21)
    classic = x.std(ddof=1) / np.sqrt(1000)
    assert se == pytest.approx(classic, rel=0.2)
    # deterministic in the seed
    assert bootstrap_se_mean(x, 400, seed=21) == se


def test_bootstrap_se_2d_columns():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(500, 3)) * np.array([1.0, 2.0, 3.0])
    se = bootstrap_se_mean(x, 300, seed=4)
    classic = x.std(axis=0, ddof=1) / np.sqrt(500)
    assert np.allclose(se, classic, rtol=0.25)
