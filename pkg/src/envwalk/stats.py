"""Statistical machinery: scan curves, power-law fits, KS tests, bootstrap.

Self-contained (no simulation imports) so every higher layer can use it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special
from scipy import stats as sps

from .streams import TAG_BOOT, lanes_for_cells, seed_lanes, uniforms_at, words_at

__all__ = [
    "InsufficientDataError",
    "ScanCurve",
    "ExponentFit",
    "GofTestResult",
    "fit_exponent",
    "with_fit",
    "ks_gaussian_test",
    "ks_two_sample_distance",
    "ks_two_sample_critical",
    "bootstrap_se_mean",
    "ks_null_calibration",
    "exponent_fit_coverage",
]


class InsufficientDataError(ValueError):
    """Raised when a scan or fit has too little usable data to report."""


@dataclass(frozen=True, eq=False)
class ExponentFit:
    """Least-squares slope of log(estimate) against log(grid)."""

    exponent: float
    ci_low: float
    ci_high: float
    n_points: int


@dataclass(frozen=True, eq=False)
class ScanCurve:
    """(grid value, estimate, standard error) table with an optional
    fitted log-log growth exponent."""

    grid: np.ndarray
    estimates: np.ndarray
    standard_errors: np.ndarray
    fit: ExponentFit | None = None


def fit_exponent(curve: ScanCurve, confidence: float = 0.95) -> ExponentFit:
    """Fit the growth exponent of a scan curve on log-log scale.

    Uses only grid points with a positive, finite estimate exceeding three
    standard errors; needs at least four such points.  The confidence
    interval comes from the residual variance via the Student-t quantile.
    """
    grid = np.asarray(curve.grid, dtype=float)
    est = np.asarray(curve.estimates, dtype=float)
    se = np.asarray(curve.standard_errors, dtype=float)
    usable = np.isfinite(est) & (est > 3.0 * se) & (est > 0.0) & (grid > 0.0)
    if usable.sum() < 4:
        raise InsufficientDataError(
            f"exponent fit needs >= 4 usable grid points, found {int(usable.sum())}"
        )
    lx, ly = np.log(grid[usable]), np.log(est[usable])
    n = lx.size
    sxx = np.sum((lx - lx.mean()) ** 2)
    slope = float(np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx)
    intercept = ly.mean() - slope * lx.mean()
    resid = ly - intercept - slope * lx
    if n > 2:
        s2 = float(resid @ resid) / (n - 2)
        half = float(sps.t.ppf(0.5 + confidence / 2.0, n - 2)) * math.sqrt(s2 / sxx)
    else:
        half = 0.0
    return ExponentFit(slope, slope - half, slope + half, n)


def with_fit(curve: ScanCurve, confidence: float = 0.95) -> ScanCurve:
    """Curve with its exponent fit attached (None when unfittable)."""
    try:
        return replace(curve, fit=fit_exponent(curve, confidence))
    except InsufficientDataError:
        return replace(curve, fit=None)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov machinery.
# ---------------------------------------------------------------------------

_KS_SERIES_TERMS = 100


def _ks_survival(x: float) -> float:
    """P(K > x) for the asymptotic Kolmogorov distribution (100-term series)."""
    if x <= 0.0:
        return 1.0
    j = np.arange(1, _KS_SERIES_TERMS + 1)
    terms = 2.0 * (-1.0) ** (j - 1) * np.exp(-2.0 * (j * x) ** 2)
    return float(min(1.0, max(0.0, terms.sum())))


@dataclass(frozen=True, eq=False)
class GofTestResult:
    """One-sample KS test of data against a reference Gaussian."""

    statistic: float
    p_value: float
    sample_size: int
    ref_mean: float
    ref_variance: float


def ks_gaussian_test(samples, mean: float, variance: float) -> GofTestResult:
    """KS distance of a 1-d sample from Normal(mean, variance).

    The p-value uses the asymptotic Kolmogorov distribution, adequate for
    sample sizes from a few dozen up; below 50 samples the test refuses.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 50:
        raise InsufficientDataError(f"KS test needs >= 50 samples, got {n}")
    if not variance > 0.0:
        raise ValueError("reference variance must be positive")
    cdf = special.ndtr((x - mean) / math.sqrt(variance))
    i = np.arange(1, n + 1)
    d = float(max((i / n - cdf).max(), (cdf - (i - 1) / n).max()))
    return GofTestResult(d, _ks_survival(math.sqrt(n) * d), n, float(mean), float(variance))


def ks_two_sample_distance(a, b) -> float:
    """Two-sample KS distance between empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    both = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, both, side="right") / a.size
    cdf_b = np.searchsorted(b, both, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())


def ks_two_sample_critical(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical distance at level ``alpha``."""
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c * math.sqrt((n + m) / (n * m))


# ---------------------------------------------------------------------------
# Deterministic bootstrap and self-calibration harnesses.
# ---------------------------------------------------------------------------


def bootstrap_se_mean(values: np.ndarray, resamples: int, seed: int) -> np.ndarray:
    """Bootstrap standard error of the mean along axis 0.

    Resample indices are a pure function of ``seed``, so the result is
    reproducible and independent of worker scheduling.  ``values`` may be
    (m,) or (m, k); returns per-column SEs.
    """
    v = np.asarray(values, dtype=float)
    m = v.shape[0]
    lanes = lanes_for_cells(seed_lanes(seed), 0, TAG_BOOT, np.arange(resamples)[:, None])
    words = words_at((lanes[0][:, None], lanes[1][:, None]), np.arange(m))
    idx = (words % np.uint64(m)).astype(np.int64)
    means = v[idx].mean(axis=1)
    return means.std(axis=0, ddof=1)


def ks_null_calibration(trials: int, n: int, seed: int, alpha: float = 0.01) -> float:
    """Fraction of null KS tests rejected at level ``alpha``.

    Each trial draws ``n`` exact standard normals from the keyed streams and
    tests them against Normal(0, 1); the observed rejection rate should sit
    near ``alpha``.
    """
    rejected = 0
    for t in range(trials):
        lanes = lanes_for_cells(seed_lanes(seed), t, TAG_BOOT, np.asarray([[0]]))
        u = uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(2 * n))[0]
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        theta = 2.0 * math.pi * u[1::2]
        z = r * np.cos(theta)
        if ks_gaussian_test(z, 0.0, 1.0).p_value < alpha:
            rejected += 1
    return rejected / trials


def exponent_fit_coverage(
    trials: int,
    seed: int,
    exponent: float = 0.5,
    n_points: int = 8,
    rel_noise: float = 0.05,
) -> float:
    """Fraction of noisy synthetic power-law fits whose CI covers the truth.

    The synthetic curve is y = n^exponent * (1 + rel_noise * z) on a dyadic
    grid with matching standard errors, so the nominal 95% CI should cover
    in roughly that fraction of trials.
    """
    grid = 2.0 ** np.arange(2, 2 + n_points)
    covered = 0
    for t in range(trials):
        lanes = lanes_for_cells(seed_lanes(seed), t, TAG_BOOT, np.asarray([[1]]))
        u = uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(2 * n_points))[0]
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        z = r * np.cos(2.0 * math.pi * u[1::2])
        truth = grid**exponent
        est = truth * (1.0 + rel_noise * z)
        se = truth * rel_noise
        fit = fit_exponent(ScanCurve(grid, est, se))
        if fit.ci_low <= exponent <= fit.ci_high:
            covered += 1
    return covered / trials
