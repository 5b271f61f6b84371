"""Scikit-learn style front end: fit on data, read off the interval.

:class:`FixedBudgetCI` packages plan construction, the K functional
evaluations, and the interval formula behind the usual estimator
conventions (``get_params`` / ``set_params`` / ``fit`` and trailing
underscore attributes), so budgeted interval construction drops into
sklearn pipelines and model-selection tooling unchanged.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import functionals as fn
from .intervals import (
    calibrate_ob_critical,
    ci_batched_jackknife,
    ci_cheap_bootstrap,
    ci_general_batching,
    ci_gs,
    ci_ob_su,
    ci_standard_batching,
    ci_weighted_cheap_bootstrap,
)
from .rng import RngStream
from .schemes import (
    cheap_bootstrap_plan,
    covariance_shape,
    equal_nonoverlapping,
    leave_one_batch_out,
    materialize,
    proportional_batches,
    su_overlapping,
    triangular_gammas,
    weighted_plan,
)

__all__ = ["FixedBudgetCI"]

_METHODS = ("b", "b_gamma", "cb", "wcb", "ob_new", "ob_su", "bj")


def _resolve_functional(functional) -> fn.Functional:
    if functional is None or functional == "mean":
        return fn.WeightedMean()
    if isinstance(functional, str):
        if functional.startswith("quantile:"):
            return fn.WeightedQuantile(float(functional.split(":", 1)[1]))
        raise ValueError(
            f"unknown functional tag {functional!r}; use 'mean', 'quantile:<p>', or a callable"
        )
    if callable(functional):
        return functional
    raise TypeError(f"functional must be a tag or callable, got {type(functional).__name__}")


class FixedBudgetCI(BaseEstimator):
    """Confidence interval for a black-box functional under a K-evaluation budget.

    Parameters
    ----------
    functional : str or callable, default "mean"
        What to estimate on each weighted subsample: ``"mean"``,
        ``"quantile:<p>"``, or any callable mapping a
        :class:`~cheapci.functionals.WeightedSample` to a float.
    method : str, default "cb"
        How to spend the budget: ``"b"`` (equal batches), ``"b_gamma"``
        (uneven batches), ``"bj"`` (batched jackknife), ``"cb"``
        (with-replacement resampling), ``"wcb"`` (Dirichlet-weighted
        resampling), ``"ob_new"`` / ``"ob_su"`` (overlapping batches
        combined optimally / with the calibrated baseline critical
        value).
    k : int, default 6
        Number of functional evaluations allowed.
    alpha : float, default 0.1
        One minus the nominal coverage level.
    gamma : float, default 0.3
        Overlapping-batch length fraction (``ob_new`` / ``ob_su``).
    gammas : sequence of float, optional
        Batch fractions for ``b_gamma``; defaults to j / (K(K+1)/2).
    dirichlet_a : float, default 1.0
        Concentration of the exchangeable weights for ``wcb``.
    ob_mc_reps : int, default 200000
        Monte Carlo size for calibrating the ``ob_su`` critical value.
    random_state : int, default 0
        Master seed for resampling plans and calibration.

    Attributes
    ----------
    center_, half_width_, lower_, upper_ : float
    interval_ : tuple (lower, upper)
    stage1_ : ndarray of the K functional evaluations
    result_ : the full :class:`~cheapci.intervals.IntervalResult`

    Examples
    --------
    >>> import numpy as np
    >>> from cheapci import FixedBudgetCI
    >>> x = np.random.default_rng(7).lognormal(size=500)
    >>> est = FixedBudgetCI(functional="quantile:0.7", method="cb", k=6)
    >>> lo, hi = est.fit(x).conf_int()
    """

    def __init__(
        self,
        functional="mean",
        method: str = "cb",
        k: int = 6,
        alpha: float = 0.1,
        gamma: float = 0.3,
        gammas=None,
        dirichlet_a: float = 1.0,
        ob_mc_reps: int = 200_000,
        random_state: int = 0,
    ):
        self.functional = functional
        self.method = method
        self.k = k
        self.alpha = alpha
        self.gamma = gamma
        self.gammas = gammas
        self.dirichlet_a = dirichlet_a
        self.ob_mc_reps = ob_mc_reps
        self.random_state = random_state

    def fit(self, X, y=None):
        """Spend the evaluation budget on ``X`` and construct the interval.

        ``X`` is (n,) or (n, d); rows are observations. For serially
        dependent data keep the rows in time order, since batching
        methods slice contiguous stretches.
        """
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {_METHODS}")
        if self.k < 2:
            raise ValueError(f"K must be >= 2, got {self.k}")
        if self.method in ("ob_new", "ob_su", "bj") and self.k < 3:
            raise ValueError(f"method {self.method!r} needs K >= 3")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        self.n_features_in_ = X.shape[1]
        sample = fn.WeightedSample.uniform(X)
        functional = _resolve_functional(self.functional)
        stream = (
            self.random_state
            if isinstance(self.random_state, RngStream)
            else RngStream(int(self.random_state), 0)
        )

        method = self.method
        alpha = float(self.alpha)
        if method == "b":
            values = self._batch_values(sample, functional, equal_nonoverlapping(self.k))
            result = ci_standard_batching(values, alpha)
        elif method == "b_gamma":
            fractions = self.gammas if self.gammas is not None else triangular_gammas(self.k)
            scheme = proportional_batches(fractions)
            if scheme.k != self.k:
                raise ValueError(f"gammas must have K = {self.k} entries, got {scheme.k}")
            values = self._batch_values(sample, functional, scheme)
            result = ci_general_batching(
                values, [float(g) for g in scheme.batch_lengths], alpha
            )
        elif method == "bj":
            values = self._batch_values(sample, functional, leave_one_batch_out(self.k))
            result = ci_batched_jackknife(values, alpha)
        elif method in ("ob_new", "ob_su"):
            scheme = su_overlapping(self.k, self.gamma)
            values = self._batch_values(sample, functional, scheme)
            if method == "ob_new":
                result = ci_gs(values, covariance_shape(scheme), alpha)
            else:
                critical = calibrate_ob_critical(
                    covariance_shape(scheme),
                    float(self.gamma),
                    self.k,
                    alpha,
                    self.ob_mc_reps,
                    stream.substream(1),
                )
                result = ci_ob_su(values, float(self.gamma), critical, alpha=alpha)
        else:  # cb / wcb
            if method == "cb":
                plan = cheap_bootstrap_plan(stream.substream(0), self.k, sample.n)
            else:
                plan = weighted_plan(stream.substream(0), self.k, sample.n, self.dirichlet_a)
            values = np.array(
                [functional(sample.reweighted(w)) for w in plan.weights]
            )
            if method == "cb":
                result = ci_cheap_bootstrap(values, alpha)
            else:
                result = ci_weighted_cheap_bootstrap(values, plan.sigma_w_sq, alpha)

        self.stage1_ = np.asarray(values, dtype=float)
        self.result_ = result
        self.center_ = result.center
        self.half_width_ = result.half_width
        self.lower_ = result.lower
        self.upper_ = result.upper
        self.interval_ = (result.lower, result.upper)
        return self

    @staticmethod
    def _batch_values(sample, functional, scheme) -> np.ndarray:
        indices = materialize(scheme, sample.n)
        return np.array([functional(sample.subset(idx)) for idx in indices])

    def conf_int(self) -> tuple[float, float]:
        """The fitted interval as a (lower, upper) pair."""
        check_is_fitted(self, "interval_")
        return self.interval_
