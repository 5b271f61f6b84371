"""Stage-2 interval formulas: combine K stage-1 estimates into a confidence interval.

All formulas are symmetric, ``center +/- half_width``, and homogeneous:
scaling or shifting every stage-1 estimate scales or shifts the interval
identically. The general covariance-weighted interval ``ci_gs`` is the
master form; the named constructions (standard/uneven batching, batched
jackknife, cheap bootstrap, weighted cheap bootstrap) are algebraically
its specializations under their scheme's covariance shape, which the
test suite verifies numerically. The overlapping-batching baseline
``ci_ob_su`` instead uses a non-t critical value obtained by Monte Carlo
calibration of its Gaussian limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .distributions import t_quantile
from .linalg import NotSPDError, check_symmetric, cholesky
from .rng import RngStream
from .schemes import CovarianceShape

__all__ = [
    "IntervalResult",
    "StageOneVector",
    "ci_gs",
    "ci_standard_batching",
    "ci_general_batching",
    "ci_batched_jackknife",
    "ci_cheap_bootstrap",
    "ci_weighted_cheap_bootstrap",
    "calibrate_ob_critical",
    "ob_critical_with_se",
    "ci_ob_su",
]


@dataclass(frozen=True)
class IntervalResult:
    """Symmetric confidence interval ``center +/- half_width``.

    ``level`` is the nominal coverage (e.g. 0.90); it may be None for
    intervals built from an externally supplied critical value.
    """

    center: float
    half_width: float
    level: float | None
    method: str

    def __post_init__(self) -> None:
        if not np.isfinite(self.center) or not np.isfinite(self.half_width):
            raise ValueError("interval center and half-width must be finite")
        if self.half_width < 0:
            raise ValueError(f"half-width must be nonnegative, got {self.half_width}")

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class StageOneVector:
    """The K model evaluations, tagged with the scheme that produced them."""

    values: np.ndarray
    kind: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] < 2:
            raise ValueError("stage-1 vector must hold at least 2 values")
        if not np.isfinite(values).all():
            raise ValueError("stage-1 values must be finite")
        object.__setattr__(self, "values", values)


def _as_values(y, min_k: int = 2) -> np.ndarray:
    if isinstance(y, StageOneVector):
        values = y.values
    else:
        values = np.asarray(y, dtype=float)
    if values.ndim != 1 or values.shape[0] < min_k:
        raise ValueError(f"need a vector of at least {min_k} estimates, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise ValueError("stage-1 estimates must be finite")
    return values


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def _as_shape(sigma) -> CovarianceShape:
    if isinstance(sigma, CovarianceShape):
        return sigma
    return CovarianceShape(check_symmetric(sigma), "user")


def ci_gs(y, sigma_shape, alpha: float) -> IntervalResult:
    """Covariance-weighted interval for stage-1 estimates with shape Sigma.

    With lambda = 1' Sigma^-1 1 and center c = (1' Sigma^-1 y) / lambda:

        c +/- t_{K-1,1-alpha/2} / sqrt(lambda (K-1))
              * sqrt((y - c 1)' Sigma^-1 (y - c 1))

    Invariant under rescaling of Sigma, so the shape only needs to be
    known up to a positive factor.
    """
    values = _as_values(y)
    alpha = _check_alpha(alpha)
    shape = _as_shape(sigma_shape)
    k = values.shape[0]
    if shape.k != k:
        raise ValueError(f"covariance shape is {shape.k}x{shape.k} but got {k} estimates")
    if np.all(values == values[0]):
        return IntervalResult(float(values[0]), 0.0, 1.0 - alpha, "gs")
    lower = shape.factor
    ones = np.ones(k)
    w_ones = solve_triangular(lower, ones, lower=True)
    w_y = solve_triangular(lower, values, lower=True)
    lam = float(w_ones @ w_ones)
    center = float(w_ones @ w_y) / lam
    w_r = w_y - center * w_ones
    quad = float(w_r @ w_r)
    half = t_quantile(k - 1, 1.0 - alpha / 2.0) / np.sqrt(lam * (k - 1)) * np.sqrt(quad)
    return IntervalResult(center, float(half), 1.0 - alpha, "gs")


def ci_standard_batching(y, alpha: float) -> IntervalResult:
    """Equal-batch interval: mean +/- t * S / sqrt(K)."""
    values = _as_values(y)
    alpha = _check_alpha(alpha)
    k = values.shape[0]
    if np.all(values == values[0]):
        return IntervalResult(float(values[0]), 0.0, 1.0 - alpha, "b")
    center = float(values.mean())
    s = np.sqrt(np.sum((values - center) ** 2) / (k - 1))
    half = t_quantile(k - 1, 1.0 - alpha / 2.0) * s / np.sqrt(k)
    return IntervalResult(center, float(half), 1.0 - alpha, "b")


def ci_general_batching(y, gammas, alpha: float) -> IntervalResult:
    """Uneven-batch interval with batch-length weights.

    Center is the gamma-weighted mean; the spread term is
    sqrt(sum_j gamma_j (y_j - center)^2 / (K - 1)).
    """
    values = _as_values(y)
    alpha = _check_alpha(alpha)
    g = np.asarray([float(x) for x in gammas], dtype=float)
    if g.shape != values.shape:
        raise ValueError("need one batch fraction per estimate")
    if (g <= 0).any() or abs(g.sum() - 1.0) > 1e-12:
        raise ValueError("batch fractions must be positive and sum to 1")
    k = values.shape[0]
    if np.all(values == values[0]):
        return IntervalResult(float(values[0]), 0.0, 1.0 - alpha, "b_gamma")
    center = float(g @ values)
    spread = np.sqrt(float(g @ (values - center) ** 2) / (k - 1))
    half = t_quantile(k - 1, 1.0 - alpha / 2.0) * spread
    return IntervalResult(center, float(half), 1.0 - alpha, "b_gamma")


def ci_batched_jackknife(y, alpha: float) -> IntervalResult:
    """Interval from leave-one-batch-out pseudo-values.

    Pseudo-values J_i = sum_j y_j - (K-1) y_i; the interval is the
    standard t interval of the J_i.
    """
    values = _as_values(y, min_k=3)
    alpha = _check_alpha(alpha)
    k = values.shape[0]
    if np.all(values == values[0]):
        return IntervalResult(float(values[0]), 0.0, 1.0 - alpha, "bj")
    pseudo = values.sum() - (k - 1) * values
    center = float(pseudo.mean())
    s = np.sqrt(np.sum((pseudo - center) ** 2) / (k - 1))
    half = t_quantile(k - 1, 1.0 - alpha / 2.0) * s / np.sqrt(k)
    return IntervalResult(center, float(half), 1.0 - alpha, "bj")


def ci_cheap_bootstrap(y, alpha: float) -> IntervalResult:
    """Resampling interval centered at the original-data estimate.

    Slot 0 of ``y`` must be the original estimate; the remaining K - 1
    entries are resample estimates. Half-width is
    t_{K-1,1-alpha/2} * sqrt(sum_b (y_b - y_0)^2 / (K - 1)).
    """
    values = _as_values(y)
    alpha = _check_alpha(alpha)
    k = values.shape[0]
    center = float(values[0])
    s = np.sqrt(np.sum((values[1:] - center) ** 2) / (k - 1))
    half = t_quantile(k - 1, 1.0 - alpha / 2.0) * s
    return IntervalResult(center, float(half), 1.0 - alpha, "cb")


def ci_weighted_cheap_bootstrap(y, sigma_w_sq: float, alpha: float) -> IntervalResult:
    """Cheap bootstrap with exchangeable weights: width rescaled by 1/sigma_W."""
    if not sigma_w_sq > 0:
        raise ValueError(f"sigma_w_sq must be positive, got {sigma_w_sq}")
    base = ci_cheap_bootstrap(y, alpha)
    return IntervalResult(
        base.center, base.half_width / np.sqrt(sigma_w_sq), base.level, "wcb"
    )


def _ob_spread(values: np.ndarray, gamma: float) -> float:
    k = values.shape[0]
    dev = values[1:] - values[0]
    return float(np.sqrt(gamma / (1.0 - gamma) * np.sum(dev**2) / (k - 1)))


def _ob_pivot_abs(z: np.ndarray, gamma: float) -> np.ndarray:
    """|Z_1 / S_OB(Z)| rowwise for draws z of shape (m, K)."""
    k = z.shape[1]
    dev = z[:, 1:] - z[:, :1]
    s = np.sqrt(gamma / (1.0 - gamma) * (dev**2).sum(axis=1) / (k - 1))
    return np.abs(z[:, 0] / s)


def _sorted_quantile(sorted_values: np.ndarray, q: float) -> float:
    # order statistic ceil(q * N): order-independent under any merge
    rank = int(np.ceil(q * sorted_values.shape[0])) - 1
    return float(sorted_values[max(rank, 0)])


def calibrate_ob_critical(
    v_ob,
    gamma: float,
    k: int,
    alpha: float,
    mc_reps: int,
    stream: RngStream,
) -> float:
    """Critical value of the overlapping-batching pivotal statistic.

    Estimates the 1 - alpha quantile of |Z_1 / S_OB(Z)| for
    Z ~ N(0, V_OB) by Monte Carlo; this is the limiting law of the
    baseline overlapping-batching statistic, so its quantile replaces
    the t critical value in :func:`ci_ob_su`.
    """
    alpha = _check_alpha(alpha)
    if k < 3:
        raise ValueError(f"K must be >= 3, got {k}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if mc_reps < 10**5:
        raise ValueError(f"mc_reps too small: need at least 1e5, got {mc_reps}")
    shape = _as_shape(v_ob)
    if shape.k != k:
        raise ValueError(f"covariance shape is {shape.k}x{shape.k} but K = {k}")
    draws = _sample_ob_pivot(shape, gamma, mc_reps, stream)
    draws.sort()
    return _sorted_quantile(draws, 1.0 - alpha)


def _sample_ob_pivot(shape: CovarianceShape, gamma: float, mc_reps: int, stream: RngStream) -> np.ndarray:
    gen = stream.generator()
    lower_t = shape.factor.T
    out = np.empty(mc_reps)
    chunk = 200_000
    done = 0
    while done < mc_reps:
        m = min(chunk, mc_reps - done)
        z = gen.standard_normal((m, shape.k)) @ lower_t
        out[done : done + m] = _ob_pivot_abs(z, gamma)
        done += m
    return out


def ob_critical_with_se(
    v_ob,
    gamma: float,
    k: int,
    alpha: float,
    mc_reps: int,
    stream: RngStream,
    n_groups: int = 10,
) -> tuple[float, float]:
    """Calibrated critical value plus a Monte Carlo standard error.

    The SE is the spread of independent subgroup quantiles scaled to the
    pooled estimate; the value itself matches
    :func:`calibrate_ob_critical` with the same arguments.
    """
    alpha = _check_alpha(alpha)
    if mc_reps < 10**5:
        raise ValueError(f"mc_reps too small: need at least 1e5, got {mc_reps}")
    shape = _as_shape(v_ob)
    if shape.k != k:
        raise ValueError(f"covariance shape is {shape.k}x{shape.k} but K = {k}")
    draws = _sample_ob_pivot(shape, gamma, mc_reps, stream)
    group_quantiles = [
        _sorted_quantile(np.sort(part), 1.0 - alpha)
        for part in np.array_split(draws, n_groups)
    ]
    se = float(np.std(group_quantiles, ddof=1) / np.sqrt(n_groups))
    draws.sort()
    return _sorted_quantile(draws, 1.0 - alpha), se


def ci_ob_su(y, gamma: float, critical: float, alpha: float | None = None) -> IntervalResult:
    """Baseline overlapping-batching interval with an external critical value.

    Slot 0 of ``y`` is the full-data estimate; the rest are the
    overlapping-batch estimates. ``critical`` comes from
    :func:`calibrate_ob_critical` at the desired level, which may be
    passed as ``alpha`` for labeling.
    """
    values = _as_values(y, min_k=3)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not critical > 0:
        raise ValueError(f"critical value must be positive, got {critical}")
    level = None if alpha is None else 1.0 - _check_alpha(alpha)
    half = critical * _ob_spread(values, gamma)
    return IntervalResult(float(values[0]), half, level, "ob_su")
