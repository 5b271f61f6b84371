"""Black-box functionals of weighted empirical distributions, plus data generators.

A functional maps a :class:`WeightedSample` (points with nonnegative
weights summing to one) to a real number. Batching evaluates it on
uniformly weighted subsets; resampling evaluates it on reweightings of
the full data, so weights, never multiset expansion, are the common
currency.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import linalg
from .distributions import normal_quantile
from .rng import RngStream

__all__ = [
    "WeightedSample",
    "Functional",
    "WeightedMean",
    "WeightedQuantile",
    "LogisticCoefficient",
    "SimulatedQueueWait",
    "NonConvergenceError",
    "weighted_quantile",
    "weighted_logistic_mle",
    "gen_lognormal",
    "gen_mm1_system_times",
    "gen_logistic_data",
    "weighted_sample_from_csv",
    "TruthSpec",
    "truth_for",
]

# Canonical desk-scale experiment parameters shared with the harness.
QUANTILE_LEVEL = 0.7
MM1_ARRIVAL_RATE = 1.0
MM1_SERVICE_RATE = 2.0
MM1_WARMUP = 1000
IU_ARRIVAL_RATE = 1.0
IU_SERVICE_RATE = 2.0
IU_CUSTOMERS = 10
IU_INNER_RUNS = 1000
# Mean queueing delay of the first 10 customers of an M/M/1 (arrival
# rate 1, service rate 2, empty start), from 1.4e8 direct-simulation
# replications; standard error 3.3e-5.
IU_TRUE_MEAN_WAIT = 0.323448


class NonConvergenceError(RuntimeError):
    """A functional's internal solver failed to converge."""


@dataclass(frozen=True)
class WeightedSample:
    """n observations (rows) with nonnegative weights summing to one."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be (n, d) with n, d >= 1, got shape {pts.shape}")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must be a vector matching the number of points")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points: np.ndarray) -> "WeightedSample":
        pts = np.asarray(points, dtype=float)
        n = pts.shape[0]
        return cls(pts, np.full(n, 1.0 / n))

    @classmethod
    def from_counts(cls, points: np.ndarray, counts: np.ndarray) -> "WeightedSample":
        counts = np.asarray(counts)
        return cls(points, counts / counts.sum())

    def reweighted(self, weights: np.ndarray) -> "WeightedSample":
        return WeightedSample(self.points, weights)

    def subset(self, indices: np.ndarray) -> "WeightedSample":
        return WeightedSample.uniform(self.points[indices])

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def scalar_values(self) -> np.ndarray:
        if self.dim != 1:
            raise ValueError(f"expected scalar observations, got width {self.dim}")
        return self.points[:, 0]


class Functional:
    """Evaluation contract: WeightedSample -> real.

    ``deterministic`` declares that equal samples give equal outputs;
    ``concurrent_safe`` that evaluations may run in parallel.
    """

    name = "functional"
    deterministic = True
    concurrent_safe = True

    def __call__(self, sample: WeightedSample) -> float:
        raise NotImplementedError


def weighted_quantile(sample: WeightedSample, p: float) -> float:
    """Smallest observation whose cumulative weight reaches p.

    Left-continuous generalized inverse of the weighted empirical CDF.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    values = sample.scalar_values()
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(sample.weights[order])
    idx = int(np.searchsorted(cum, p, side="left"))
    idx = min(idx, sample.n - 1)  # guard cum[-1] = 1 - eps
    return float(values[order[idx]])


class WeightedMean(Functional):
    name = "mean"

    def __call__(self, sample: WeightedSample) -> float:
        return float(sample.weights @ sample.scalar_values())


class WeightedQuantile(Functional):
    def __init__(self, p: float):
        if not 0.0 < p < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {p}")
        self.p = float(p)
        self.name = f"quantile({self.p:g})"

    def __call__(self, sample: WeightedSample) -> float:
        return weighted_quantile(sample, self.p)


def weighted_logistic_mle(
    x: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> np.ndarray:
    """Weighted logistic-regression MLE by Newton iteration (IRLS).

    Maximizes sum_i w_i * [y_i * x_i.b - log(1 + exp(x_i.b))], starting
    from zero, stopping when the largest coefficient change drops below
    ``tol``. Raises :class:`NonConvergenceError` after ``max_iter``
    steps or on a singular Hessian (e.g. separable data).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    beta = np.zeros(x.shape[1])
    for _ in range(max_iter):
        p = expit(x @ beta)
        grad = x.T @ (w * (y - p))
        curv = w * p * (1.0 - p)
        hess = (x * curv[:, None]).T @ x
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as err:
            raise NonConvergenceError(f"singular Hessian in logistic fit: {err}") from err
        beta = beta + step
        if np.abs(step).max() < tol:
            return beta
    raise NonConvergenceError(f"logistic fit did not converge in {max_iter} iterations")


class LogisticCoefficient(Functional):
    """Coordinate ``index`` (1-based) of the weighted logistic-regression MLE.

    Expects rows ``(x_1, ..., x_d, y)`` with the binary label in the
    last column.
    """

    def __init__(self, index: int, tol: float = 1e-8, max_iter: int = 100):
        if index < 1:
            raise ValueError(f"coefficient index is 1-based, got {index}")
        self.index = int(index)
        self.tol = tol
        self.max_iter = max_iter
        self.name = f"logistic_coef({self.index})"

    def __call__(self, sample: WeightedSample) -> float:
        if sample.dim < 2:
            raise ValueError("need at least one feature column plus a label column")
        if self.index > sample.dim - 1:
            raise ValueError(f"coefficient index {self.index} exceeds feature count {sample.dim - 1}")
        x = sample.points[:, :-1]
        y = sample.points[:, -1]
        beta = weighted_logistic_mle(x, y, sample.weights, self.tol, self.max_iter)
        return float(beta[self.index - 1])


class SimulatedQueueWait(Functional):
    """Mean queueing delay of the first customers of a single-server queue.

    The sample is treated as the service-time distribution; arrivals are
    Poisson with known rate. Each evaluation averages ``n_runs``
    simulated runs of ``n_customers`` customers starting from an empty
    system. All runs reuse one fixed set of interarrival times and
    service-time uniforms drawn from ``stream`` (common random numbers),
    so the functional is deterministic given the sample and couples
    smoothly across reweightings of the same data.
    """

    def __init__(
        self,
        stream: RngStream,
        arrival_rate: float = IU_ARRIVAL_RATE,
        n_customers: int = IU_CUSTOMERS,
        n_runs: int = IU_INNER_RUNS,
    ):
        if not arrival_rate > 0:
            raise ValueError("arrival rate must be positive")
        if n_customers < 1 or n_runs < 1:
            raise ValueError("n_customers and n_runs must be positive")
        gen = stream.generator()
        self._interarrivals = gen.exponential(1.0 / arrival_rate, size=(n_runs, n_customers))
        self._service_u = gen.random((n_runs, n_customers))
        self.name = f"queue_wait(first {n_customers})"

    def __call__(self, sample: WeightedSample) -> float:
        values = sample.scalar_values()
        order = np.argsort(values, kind="stable")
        cum = np.cumsum(sample.weights[order])
        idx = np.searchsorted(cum, self._service_u, side="left")
        np.clip(idx, 0, sample.n - 1, out=idx)
        service = values[order][idx]
        # Lindley recursion via reflection: W_c = C_c - min_{j<=c} C_j.
        inc = service[:, :-1] - self._interarrivals[:, 1:]
        c = np.concatenate([np.zeros((inc.shape[0], 1)), np.cumsum(inc, axis=1)], axis=1)
        waits = c - np.minimum.accumulate(c, axis=1)
        return float(waits.mean())


def gen_lognormal(stream: RngStream, n: int) -> WeightedSample:
    """n i.i.d. standard lognormal observations with uniform weights."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    draws = np.exp(stream.generator().standard_normal(n))
    return WeightedSample.uniform(draws)


def gen_mm1_system_times(
    stream: RngStream,
    n: int,
    warmup: int = 0,
    arrival_rate: float = MM1_ARRIVAL_RATE,
    service_rate: float = MM1_SERVICE_RATE,
) -> WeightedSample:
    """System (sojourn) times of customers in a stationary-bound M/M/1 queue.

    Simulates ``warmup + n`` customers from an empty system via the
    Lindley recursion W_{k+1} = max(W_k + S_k - A_{k+1}, 0), returns the
    last ``n`` values of W_k + S_k. The sequence is serially dependent.
    """
    if n < 1 or warmup < 0:
        raise ValueError("need n >= 1 and warmup >= 0")
    if not 0 < arrival_rate < service_rate:
        raise ValueError(
            f"unstable queue: arrival rate {arrival_rate} must be below service rate {service_rate}"
        )
    m = n + warmup
    gen = stream.generator()
    interarrivals = gen.exponential(1.0 / arrival_rate, size=m)
    service = gen.exponential(1.0 / service_rate, size=m)
    inc = service[:-1] - interarrivals[1:]
    c = np.concatenate([[0.0], np.cumsum(inc)])
    waits = c - np.minimum.accumulate(c)
    system_times = waits + service
    return WeightedSample.uniform(system_times[warmup:])


def gen_logistic_data(
    stream: RngStream,
    n: int,
    beta: np.ndarray,
    cov_scale: float = 0.01,
    cov_decay: float = 0.8,
) -> WeightedSample:
    """Rows (x_1..x_d, y): Gaussian features with geometric covariance, logistic labels.

    Cov(X_i, X_j) = cov_scale * cov_decay^|i-j| and
    P(Y=1 | X) = expit(X . beta).
    """
    beta = np.asarray(beta, dtype=float)
    d = beta.shape[0]
    if d < 1:
        raise ValueError("beta must have at least one coordinate")
    if not cov_scale > 0 or not abs(cov_decay) < 1:
        raise ValueError("need cov_scale > 0 and |cov_decay| < 1")
    cov = cov_scale * cov_decay ** np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
    factor = linalg.cholesky(cov)
    gen = stream.generator()
    x = gen.standard_normal((n, d)) @ factor.T
    labels = (gen.random(n) < expit(x @ beta)).astype(float)
    return WeightedSample.uniform(np.column_stack([x, labels]))


def weighted_sample_from_csv(path: str | Path) -> WeightedSample:
    """Load observations from CSV: one row per observation.

    A header row is optional. If a column is named ``weight``
    (case-insensitive), it supplies the weights; otherwise weights are
    uniform and every column is an observation coordinate.
    """
    rows: list[list[str]] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and any(cell.strip() for cell in row):
                rows.append([cell.strip() for cell in row])
    if not rows:
        raise ValueError(f"no data rows in {path}")

    header: list[str] | None = None
    try:
        [float(cell) for cell in rows[0]]
    except ValueError:
        header = [cell.lower() for cell in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"no data rows in {path}")
    data = np.array([[float(cell) for cell in row] for row in rows])
    if header is not None and "weight" in header:
        wcol = header.index("weight")
        weights = data[:, wcol]
        points = np.delete(data, wcol, axis=1)
        if points.shape[1] == 0:
            raise ValueError("weight column present but no observation columns")
        return WeightedSample(points, weights / weights.sum())
    return WeightedSample.uniform(data)


@dataclass(frozen=True)
class TruthSpec:
    """Analytic target value an experiment's intervals should cover."""

    value: float
    description: str

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError("truth value must be finite")


def truth_for(experiment: str) -> TruthSpec:
    """Ground-truth functional value for a named experiment."""
    if experiment == "lognormal_quantile":
        return TruthSpec(
            math.exp(normal_quantile(QUANTILE_LEVEL)),
            f"{QUANTILE_LEVEL} quantile of the standard lognormal, exp(z_{QUANTILE_LEVEL})",
        )
    if experiment == "mm1_quantile":
        rate = MM1_SERVICE_RATE - MM1_ARRIVAL_RATE
        return TruthSpec(
            -math.log(1.0 - QUANTILE_LEVEL) / rate,
            f"{QUANTILE_LEVEL} quantile of the stationary M/M/1 system time, Exponential({rate:g})",
        )
    if experiment == "logistic":
        return TruthSpec(1.0, "first logistic-regression coefficient of the generating model")
    if experiment == "input_uncertainty_mm1":
        return TruthSpec(
            IU_TRUE_MEAN_WAIT,
            f"mean queueing delay of the first {IU_CUSTOMERS} M/M/1 customers (direct simulation)",
        )
    raise ValueError(f"unknown experiment tag: {experiment!r}")
