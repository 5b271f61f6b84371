"""Probability distributions used by the interval formulas and experiments.

Quantiles and CDFs are thin validated wrappers over scipy.stats; the
test suite checks them against an independent quadrature/bisection
oracle. Samplers consume an :class:`~cheapci.rng.RngStream` value and
are pure: the same stream always yields the same draws.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import stats

from .rng import RngStream

__all__ = [
    "t_quantile",
    "t_cdf",
    "normal_quantile",
    "normal_cdf",
    "chi2_quantile",
    "chi2_cdf",
    "standard_normal",
    "exponential",
    "lognormal",
    "sample_multinomial_counts",
    "sample_dirichlet",
]


def _check_probability(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 < p < 1.0 or not np.isfinite(p):
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {p}")
    return p


def _check_df(df: int) -> int:
    if not isinstance(df, (int, np.integer)):
        raise TypeError(f"df must be an integer, got {type(df).__name__}")
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    return int(df)


@lru_cache(maxsize=4096)
def t_quantile(df: int, p: float) -> float:
    """p-quantile of the Student-t distribution with ``df`` degrees of freedom."""
    df = _check_df(df)
    p = _check_probability(p)
    if p == 0.5:
        return 0.0
    return float(stats.t.ppf(p, df))


def t_cdf(df: int, x: float) -> float:
    """CDF of the Student-t distribution with ``df`` degrees of freedom."""
    return float(stats.t.cdf(x, _check_df(df)))


@lru_cache(maxsize=1024)
def normal_quantile(p: float) -> float:
    """p-quantile of the standard normal distribution."""
    p = _check_probability(p)
    if p == 0.5:
        return 0.0
    return float(stats.norm.ppf(p))


def normal_cdf(x: float) -> float:
    return float(stats.norm.cdf(x))


@lru_cache(maxsize=1024)
def chi2_quantile(df: int, p: float) -> float:
    """p-quantile of the chi-square distribution with ``df`` degrees of freedom."""
    return float(stats.chi2.ppf(_check_probability(p), _check_df(df)))


def chi2_cdf(df: int, x: float) -> float:
    return float(stats.chi2.cdf(x, _check_df(df)))


def standard_normal(stream: RngStream, size: int | tuple[int, ...] | None = None) -> np.ndarray | float:
    """Standard normal draws; deterministic given the stream value."""
    return stream.generator().standard_normal(size)


def exponential(stream: RngStream, rate: float, size: int | tuple[int, ...] | None = None) -> np.ndarray | float:
    """Exponential draws with the given rate (mean ``1/rate``)."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return stream.generator().exponential(1.0 / rate, size)


def lognormal(stream: RngStream, size: int | tuple[int, ...] | None = None) -> np.ndarray | float:
    """Standard lognormal draws, exp(Z) with Z standard normal."""
    return np.exp(stream.generator().standard_normal(size))


def sample_multinomial_counts(stream: RngStream, n: int) -> np.ndarray:
    """Occupancy counts of ``n`` uniform draws over ``n`` categories.

    Equivalent to sampling ``n`` items with replacement from an
    ``n``-point set and counting how often each item appears; each
    marginal count is Binomial(n, 1/n) and the counts sum to ``n``.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    draws = stream.generator().integers(0, n, size=n)
    return np.bincount(draws, minlength=n)


def sample_dirichlet(stream: RngStream, a: float, n: int) -> np.ndarray:
    """Symmetric Dirichlet(a, ..., a) weight vector of length ``n``.

    Weights are gamma draws renormalized to sum to one exactly, making
    them exchangeable and nonnegative. The variance of a scaled
    coordinate, Var(n * W_1) = (n - 1) / (n * a + 1), tends to ``1/a``
    for large ``n``.
    """
    a = float(a)
    if not a > 0:
        raise ValueError(f"concentration a must be positive, got {a}")
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    g = stream.generator().standard_gamma(a, size=n)
    total = g.sum()
    if total <= 0.0:
        raise ValueError("degenerate Dirichlet draw: all gamma variates underflowed to zero")
    return g / total
