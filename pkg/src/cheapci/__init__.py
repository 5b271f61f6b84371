"""Confidence intervals for expensive black-box functionals under a fixed evaluation budget.

The library splits interval construction in two: a *plan* for spending
the budget of K model evaluations (batching schemes or resampling
plans, :mod:`cheapci.schemes`), and a *formula* combining the K
evaluations into a symmetric t-based interval
(:mod:`cheapci.intervals`). :class:`cheapci.estimator.FixedBudgetCI`
wraps both behind a scikit-learn style ``fit`` API, and
:mod:`cheapci.experiments` measures coverage and interval length over
many replications.
"""

from .rng import RngStream
from .distributions import (
    chi2_cdf,
    chi2_quantile,
    normal_cdf,
    normal_quantile,
    t_cdf,
    t_quantile,
)
from .linalg import NotSPDError
from .schemes import (
    BatchScheme,
    CovarianceShape,
    ResamplePlan,
    cheap_bootstrap_plan,
    covariance_shape,
    equal_nonoverlapping,
    leave_one_batch_out,
    materialize,
    proportional_batches,
    resample_covariance_shape,
    scheme_from_json,
    scheme_to_json,
    su_overlapping,
    triangular_gammas,
    weighted_plan,
)
from .functionals import (
    Functional,
    LogisticCoefficient,
    NonConvergenceError,
    SimulatedQueueWait,
    TruthSpec,
    WeightedMean,
    WeightedQuantile,
    WeightedSample,
    gen_lognormal,
    gen_logistic_data,
    gen_mm1_system_times,
    truth_for,
    weighted_quantile,
    weighted_sample_from_csv,
)
from .intervals import (
    IntervalResult,
    StageOneVector,
    calibrate_ob_critical,
    ci_batched_jackknife,
    ci_cheap_bootstrap,
    ci_general_batching,
    ci_gs,
    ci_ob_su,
    ci_standard_batching,
    ci_weighted_cheap_bootstrap,
)
from .estimator import FixedBudgetCI
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    length_distribution_check,
    parse_method,
    report_to_csv,
    report_to_markdown,
    run_experiment,
    run_replication,
)

__version__ = "0.1.0"

__all__ = [
    "RngStream",
    "t_quantile",
    "t_cdf",
    "normal_quantile",
    "normal_cdf",
    "chi2_quantile",
    "chi2_cdf",
    "NotSPDError",
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
    "WeightedSample",
    "Functional",
    "WeightedMean",
    "WeightedQuantile",
    "LogisticCoefficient",
    "SimulatedQueueWait",
    "NonConvergenceError",
    "weighted_quantile",
    "weighted_sample_from_csv",
    "gen_lognormal",
    "gen_mm1_system_times",
    "gen_logistic_data",
    "TruthSpec",
    "truth_for",
    "IntervalResult",
    "StageOneVector",
    "ci_gs",
    "ci_standard_batching",
    "ci_general_batching",
    "ci_batched_jackknife",
    "ci_cheap_bootstrap",
    "ci_weighted_cheap_bootstrap",
    "calibrate_ob_critical",
    "ci_ob_su",
    "FixedBudgetCI",
    "ExperimentConfig",
    "ExperimentReport",
    "parse_method",
    "run_replication",
    "run_experiment",
    "length_distribution_check",
    "report_to_csv",
    "report_to_markdown",
]
