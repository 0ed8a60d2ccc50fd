"""Correlation, regression, percentiles and resampling tests.

Percentiles interpolate linearly between the closest ranks (numpy's
default ``linear`` method).  Log-log analyses use base-10 logs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import UndefinedStatistic
from .rng import generator


def _pair(x, y=None) -> tuple[np.ndarray, np.ndarray]:
    if y is None:
        arr = np.asarray(x, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("sample must be a sequence of (x, y) pairs")
        x, y = arr[:, 0], arr[:, 1]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and of equal length")
    if x.size < 2:
        raise UndefinedStatistic("need at least two pairs")
    return x, y


def pearson_r(x, y=None) -> float:
    """Product-moment correlation of paired data.

    Accepts either ``pearson_r(pairs)`` with an (N, 2) array or ``pearson_r(x, y)``.
    """
    x, y = _pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedStatistic("correlation undefined: zero variance")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def spearman_rank(x, y=None) -> float:
    """Pearson r of average-ranked data."""
    x, y = _pair(x, y)
    return pearson_r(rankdata(x), rankdata(y))


def ols_fit(x, y=None) -> tuple[float, float]:
    """Least-squares line ``y = intercept + gradient * x``."""
    x, y = _pair(x, y)
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise UndefinedStatistic("regression undefined: zero variance in x")
    gradient = float(dx @ (y - y.mean())) / sxx
    return float(y.mean() - gradient * x.mean()), gradient


def _rows_r(x: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Pearson r of ``x`` against every row of ``ys``; NaN for constant rows."""
    dx = x - x.mean()
    dy = ys - ys.mean(axis=1, keepdims=True)
    num = dy @ dx
    den = np.sqrt((dx @ dx) * np.einsum("ij,ij->i", dy, dy))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / den
    r[den == 0] = np.nan
    return np.clip(r, -1.0, 1.0)


@dataclass(frozen=True)
class RandomizationResult:
    r_observed: float
    null_rs: np.ndarray
    p_two_sided: float
    reject_999: bool


def randomization_test(x, y=None, K: int = 1000, rng=None) -> RandomizationResult:
    """Permutation test of the correlation: ``y`` is shuffled against fixed ``x``.

    ``p = (1 + #{|r_null| >= |r_obs|}) / (K + 1)``.  ``reject_999`` is set
    when the observed r lies outside the range of the ``K`` null values and
    ``p < 0.001`` would be attainable (``K >= 999``), i.e. the range criterion.
    """
    x, y = _pair(x, y)
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = _as_rng(rng)
    r_obs = pearson_r(x, y)
    perms = np.argsort(rng.random((K, y.size)), axis=1)
    null = _rows_r(x, y[perms])
    exceed = int(np.count_nonzero(np.abs(null) >= abs(r_obs) - 1e-12))
    p = (1 + exceed) / (K + 1)
    outside = bool(r_obs > np.max(null) or r_obs < np.min(null))
    return RandomizationResult(r_obs, null, p, outside and K >= 999)


@dataclass(frozen=True)
class BootstrapCi:
    lo: float
    hi: float
    B: int
    rs: np.ndarray
    resampled: int = 0


def bootstrap_ci_r(x, y=None, B: int = 1000, rng=None, max_redraws: int | None = None
                   ) -> BootstrapCi:
    """Percentile bootstrap (2.5th, 97.5th) for Pearson r over pairs drawn with replacement.

    Degenerate pseudo-samples (zero variance) are redrawn, at most
    ``max_redraws`` times in total (default ``10 * B``).
    """
    x, y = _pair(x, y)
    if B < 1:
        raise ValueError("B must be >= 1")
    rng = _as_rng(rng)
    N = x.size
    limit = 10 * B if max_redraws is None else max_redraws
    rs = np.empty(B)
    filled = 0
    redraws = 0
    while filled < B:
        need = B - filled
        idx = rng.integers(0, N, size=(need, N))
        xs, ys = x[idx], y[idx]
        dx = xs - xs.mean(axis=1, keepdims=True)
        dy = ys - ys.mean(axis=1, keepdims=True)
        den = np.sqrt(np.einsum("ij,ij->i", dx, dx) * np.einsum("ij,ij->i", dy, dy))
        good = den > 0
        r = np.einsum("ij,ij->i", dx, dy)[good] / den[good]
        rs[filled:filled + r.size] = np.clip(r, -1.0, 1.0)
        filled += r.size
        redraws += int(np.count_nonzero(~good))
        if redraws > limit:
            raise UndefinedStatistic("bootstrap pseudo-samples persistently degenerate")
    lo, hi = np.percentile(rs, [2.5, 97.5])
    return BootstrapCi(float(lo), float(hi), B, rs, redraws)


def percentiles(values, qs) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise UndefinedStatistic("percentile of empty data")
    return np.percentile(v, qs)


def median(values) -> float:
    return float(percentiles(values, 50))


def iqr(values) -> float:
    q1, q3 = percentiles(values, (25, 75))
    return float(q3 - q1)


def _as_rng(rng) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, tuple):
        return generator(*rng)
    return generator(int(rng))
