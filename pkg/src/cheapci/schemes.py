"""Stage-1 plans: how the budget of K evaluations is spent on the data.

Two families are supported. *Batch schemes* describe each batch as a
union of fractional subintervals of [0, 1] with exact rational
endpoints, independent of the data size n; the induced joint-CLT
covariance shape V follows from the batch lengths gamma_i and pairwise
overlaps beta_ij as V_ii = 1/gamma_i, V_ij = beta_ij / (gamma_i *
gamma_j). *Resample plans* hold K - 1 random weight vectors (multinomial
resampling or exchangeable Dirichlet weights) next to the original
empirical distribution in slot 0; their covariance shapes are fixed
matrices known in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import linalg
from .distributions import sample_dirichlet, sample_multinomial_counts
from .rng import RngStream

__all__ = [
    "BatchScheme",
    "CovarianceShape",
    "ResamplePlan",
    "equal_nonoverlapping",
    "proportional_batches",
    "su_overlapping",
    "leave_one_batch_out",
    "triangular_gammas",
    "covariance_shape",
    "cheap_bootstrap_plan",
    "weighted_plan",
    "resample_covariance_shape",
    "materialize",
    "scheme_to_json",
    "scheme_from_json",
]

Interval = tuple[Fraction, Fraction]

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _to_fraction(x, name: str = "value") -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"{name} must be finite, got {x}")
        # snap the binary float to the simple rational the caller meant
        # (e.g. 0.3 -> 3/10), so interval endpoints stay exact
        return Fraction(x).limit_denominator(10**9)
    raise TypeError(f"{name} must be a number or Fraction, got {type(x).__name__}")


def _union_length(intervals: Sequence[Interval]) -> Fraction:
    return sum((b - a for a, b in intervals), _ZERO)


def _intersection_length(first: Sequence[Interval], second: Sequence[Interval]) -> Fraction:
    total = _ZERO
    for a1, b1 in first:
        for a2, b2 in second:
            lo, hi = max(a1, a2), min(b1, b2)
            if hi > lo:
                total += hi - lo
    return total


@dataclass(frozen=True)
class BatchScheme:
    """A plan assigning each of K batches a union of data subintervals.

    ``batches[j]`` is a tuple of disjoint, ordered ``(a, b)`` Fraction
    pairs inside [0, 1]. ``kind`` tags the constructor family; ``gamma``
    / ``gammas`` record constructor parameters for serialization.
    """

    kind: str
    k: int
    batches: tuple[tuple[Interval, ...], ...]
    gamma: Fraction | None = None
    gammas: tuple[Fraction, ...] | None = None

    def __post_init__(self) -> None:
        if self.k != len(self.batches):
            raise ValueError("batch count does not match k")
        if self.k < 2:
            raise ValueError(f"K must be >= 2, got {self.k}")
        for j, intervals in enumerate(self.batches):
            if not intervals:
                raise ValueError(f"batch {j + 1} is empty")
            prev_end = _ZERO
            for a, b in intervals:
                if not (_ZERO <= a <= b <= _ONE):
                    raise ValueError(f"batch {j + 1} has interval [{a}, {b}] outside [0, 1]")
                if a < prev_end:
                    raise ValueError(f"batch {j + 1} has overlapping or unordered intervals")
                prev_end = b
            if _union_length(intervals) <= 0:
                raise ValueError(f"batch {j + 1} has zero length")

    @property
    def batch_lengths(self) -> tuple[Fraction, ...]:
        """gamma_j: total fractional length of each batch."""
        return tuple(_union_length(b) for b in self.batches)

    def overlap(self, i: int, j: int) -> Fraction:
        """beta_ij: fractional length shared by batches i and j (0-based)."""
        return _intersection_length(self.batches[i], self.batches[j])


@dataclass(frozen=True)
class CovarianceShape:
    """Joint-CLT covariance of the K stage-1 estimates, up to scale.

    Validated SPD at construction; the Cholesky factor is cached so the
    interval formulas can reuse it across many stage-1 vectors.
    """

    v: np.ndarray
    provenance: str  # "lemma-overlap" | "cb" | "wcb" | "user"
    factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        v = linalg.check_symmetric(self.v)
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "factor", linalg.cholesky(v))

    @property
    def k(self) -> int:
        return self.v.shape[0]


def equal_nonoverlapping(k: int) -> BatchScheme:
    """K contiguous equal-length batches tiling the data."""
    if k < 2:
        raise ValueError(f"K must be >= 2, got {k}")
    edges = [Fraction(j, k) for j in range(k + 1)]
    batches = tuple(((edges[j], edges[j + 1]),) for j in range(k))
    gammas = tuple(Fraction(1, k) for _ in range(k))
    return BatchScheme("equal", k, batches, gammas=gammas)


def proportional_batches(gammas: Sequence[float | Fraction]) -> BatchScheme:
    """Contiguous non-overlapping batches with prescribed length fractions."""
    fracs = [_to_fraction(g, "gamma") for g in gammas]
    if len(fracs) < 2:
        raise ValueError("need at least 2 batch fractions")
    if any(g <= 0 for g in fracs):
        raise ValueError("batch fractions must be positive")
    total = sum(fracs, _ZERO)
    if abs(float(total) - 1.0) > 1e-12:
        raise ValueError(f"batch fractions must sum to 1, got {float(total)}")
    fracs = [g / total for g in fracs]  # exact renormalization
    edges = [_ZERO]
    for g in fracs:
        edges.append(edges[-1] + g)
    batches = tuple(((edges[j], edges[j + 1]),) for j in range(len(fracs)))
    return BatchScheme("proportional", len(fracs), batches, gammas=tuple(fracs))


def triangular_gammas(k: int) -> tuple[Fraction, ...]:
    """Length fractions j / (K(K+1)/2): batch j holds a share proportional to j."""
    if k < 2:
        raise ValueError(f"K must be >= 2, got {k}")
    denom = k * (k + 1) // 2
    return tuple(Fraction(j, denom) for j in range(1, k + 1))


def su_overlapping(k: int, gamma: float | Fraction) -> BatchScheme:
    """One full-data batch plus K-1 equally spaced batches of length gamma.

    Batch 1 covers all the data; batch j (j >= 2) starts at
    (j - 2) * (1 - gamma) / (K - 2) and spans length gamma, so adjacent
    batches overlap whenever gamma exceeds the spacing.
    """
    if k < 3:
        raise ValueError(f"K must be >= 3 for overlapping batching, got {k}")
    g = _to_fraction(gamma, "gamma")
    if not (_ZERO < g < _ONE):
        raise ValueError(f"gamma must lie in (0, 1), got {float(g)}")
    step = (_ONE - g) / (k - 2)
    batches: list[tuple[Interval, ...]] = [((_ZERO, _ONE),)]
    for j in range(2, k + 1):
        start = (j - 2) * step
        batches.append(((start, start + g),))
    return BatchScheme("su_overlapping", k, tuple(batches), gamma=g)


def leave_one_batch_out(k: int) -> BatchScheme:
    """Batch j holds everything except the j-th of K equal slices."""
    if k < 3:
        raise ValueError(f"K must be >= 3 for leave-one-batch-out, got {k}")
    batches: list[tuple[Interval, ...]] = []
    for j in range(1, k + 1):
        left = (_ZERO, Fraction(j - 1, k))
        right = (Fraction(j, k), _ONE)
        intervals = tuple(iv for iv in (left, right) if iv[1] > iv[0])
        batches.append(intervals)
    return BatchScheme("jackknife", k, tuple(batches))


def covariance_shape(scheme: BatchScheme) -> CovarianceShape:
    """Covariance shape induced by batch lengths and overlaps.

    V_ii = 1/gamma_i and V_ij = beta_ij / (gamma_i * gamma_j), evaluated
    in exact rational arithmetic before the final float conversion.
    """
    gammas = scheme.batch_lengths
    k = scheme.k
    v = np.empty((k, k), dtype=float)
    for i in range(k):
        v[i, i] = float(1 / gammas[i])
        for j in range(i + 1, k):
            entry = float(scheme.overlap(i, j) / (gammas[i] * gammas[j]))
            v[i, j] = entry
            v[j, i] = entry
    return CovarianceShape(v, "lemma-overlap")


@dataclass(frozen=True)
class ResamplePlan:
    """K - 1 random reweightings of the data plus the original in slot 0.

    ``weights`` has shape (K, n); row 0 is the uniform vector and each
    later row sums to one. ``sigma_w_sq`` is the limiting variance of a
    scaled weight coordinate, Var(n * W_1): 1 for multinomial
    resampling, 1/a for Dirichlet(a) weights.
    """

    kind: str  # "cheap_bootstrap" | "weighted"
    k: int
    n: int
    weights: np.ndarray
    sigma_w_sq: float

    def __post_init__(self) -> None:
        if self.weights.shape != (self.k, self.n):
            raise ValueError("weights array must have shape (k, n)")
        if (self.weights < 0).any():
            raise ValueError("weights must be nonnegative")
        if np.abs(self.weights.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("each weight vector must sum to 1")
        if not self.sigma_w_sq > 0:
            raise ValueError("sigma_w_sq must be positive")


def _check_plan_args(k: int, n: int) -> None:
    if k < 2:
        raise ValueError(f"K must be >= 2, got {k}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")


def cheap_bootstrap_plan(stream: RngStream, k: int, n: int) -> ResamplePlan:
    """Uniform with-replacement resampling: weights are counts / n."""
    _check_plan_args(k, n)
    weights = np.empty((k, n), dtype=float)
    weights[0] = 1.0 / n
    for b in range(1, k):
        counts = sample_multinomial_counts(stream.substream(b), n)
        weights[b] = counts / n
    return ResamplePlan("cheap_bootstrap", k, n, weights, sigma_w_sq=1.0)


def weighted_plan(stream: RngStream, k: int, n: int, a: float) -> ResamplePlan:
    """Exchangeable Dirichlet(a, ..., a) reweighting; sigma_W^2 = 1/a."""
    _check_plan_args(k, n)
    if not a > 0:
        raise ValueError(f"concentration a must be positive, got {a}")
    weights = np.empty((k, n), dtype=float)
    weights[0] = 1.0 / n
    for b in range(1, k):
        weights[b] = sample_dirichlet(stream.substream(b), a, n)
    return ResamplePlan("weighted", k, n, weights, sigma_w_sq=1.0 / float(a))


def resample_covariance_shape(kind: str, k: int, sigma_w_sq: float = 1.0) -> CovarianceShape:
    """Closed-form covariance shape of resampling stage-1 estimates.

    Slot 0 is the original estimate with unit variance; every resample
    has variance 1 + sigma_W^2 and unit covariance with all other slots.
    Multinomial resampling is the sigma_W^2 = 1 special case.
    """
    if k < 2:
        raise ValueError(f"K must be >= 2, got {k}")
    if kind == "cheap_bootstrap":
        sigma_w_sq = 1.0
    elif kind != "weighted":
        raise ValueError(f"unknown resample kind: {kind!r}")
    if not sigma_w_sq > 0:
        raise ValueError(f"sigma_w_sq must be positive, got {sigma_w_sq}")
    v = np.ones((k, k), dtype=float)
    np.fill_diagonal(v, 1.0 + sigma_w_sq)
    v[0, 0] = 1.0
    return CovarianceShape(v, "cb" if kind == "cheap_bootstrap" else "wcb")


def materialize(scheme: BatchScheme, n: int) -> list[np.ndarray]:
    """Turn fractional batches into 0-based index arrays for n data points.

    An interval [a, b] maps to indices floor(a*n) .. floor(b*n) - 1, so
    contiguous non-overlapping schemes partition range(n) with any
    remainder landing in the last batch.
    """
    if n < scheme.k:
        raise ValueError(f"n must be at least K = {scheme.k}, got {n}")
    out: list[np.ndarray] = []
    for j, intervals in enumerate(scheme.batches):
        pieces = []
        for a, b in intervals:
            lo = math.floor(a * n)
            hi = math.floor(b * n)
            if hi > lo:
                pieces.append(np.arange(lo, hi))
        if not pieces:
            raise ValueError(f"batch {j + 1} materializes to no indices at n = {n}")
        out.append(np.concatenate(pieces))
    return out


def scheme_to_json(scheme: BatchScheme) -> str:
    """Serialize a scheme's constructor form (kind, K, parameters)."""
    doc: dict = {"kind": scheme.kind, "k": scheme.k}
    if scheme.kind == "su_overlapping":
        doc["gamma"] = float(scheme.gamma)
    elif scheme.kind == "proportional":
        doc["gammas"] = [float(g) for g in scheme.gammas]
    return json.dumps(doc)


def scheme_from_json(text: str) -> BatchScheme:
    doc = json.loads(text)
    kind = doc.get("kind")
    k = doc.get("k")
    if kind == "equal":
        return equal_nonoverlapping(k)
    if kind == "proportional":
        return proportional_batches(doc["gammas"])
    if kind == "su_overlapping":
        return su_overlapping(k, doc["gamma"])
    if kind == "jackknife":
        return leave_one_batch_out(k)
    raise ValueError(f"unknown scheme kind: {kind!r}")
