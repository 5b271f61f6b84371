"""Coverage and half-length experiments: many replications, paired methods.

Each replication generates one dataset from a seeded stream, builds the
stage-1 estimates every requested method needs, applies the interval
formulas, and records whether the analytic truth was covered along with
the half-width. All methods inside a replication see the same dataset
(and, where two methods share a batching plan, the same stage-1
estimates), so method comparisons are paired. Replication ``i`` draws
all of its randomness from ``RngStream(master_seed, i)``, which makes
reports bit-identical across reruns and worker counts.
"""

from __future__ import annotations

import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import functionals as fn
from .intervals import (
    IntervalResult,
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
    BatchScheme,
    CovarianceShape,
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

__all__ = [
    "MethodSpec",
    "parse_method",
    "ExperimentConfig",
    "MethodResult",
    "ExperimentReport",
    "run_replication",
    "run_experiment",
    "length_distribution_check",
    "report_to_csv",
    "report_to_markdown",
    "resolve_workers",
]

METHOD_KINDS = ("b", "b_gamma", "cb", "wcb", "ob_new", "ob_su", "bj")
EXPERIMENT_TAGS = ("lognormal_quantile", "mm1_quantile", "logistic", "input_uncertainty_mm1")

# Coefficients of the logistic data-generating model; the experiment
# targets the first coordinate.
LOGISTIC_BETA = (1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0)

# Substream labels within one replication.
_SUB_DATA = 0
_SUB_CB = 1
_SUB_INNER = 2
_SUB_WCB_BASE = 16  # +position of the method in the config
# Stream id reserved for the overlapping-batching calibration draw.
_OB_CALIBRATION_STREAM = 2**63
_OB_CALIBRATION_REPS = 10**6

_MAX_FAILURE_RATE = 0.01


@dataclass(frozen=True)
class MethodSpec:
    """One interval method in a config; ``a`` is the Dirichlet concentration (wcb only)."""

    kind: str
    a: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in METHOD_KINDS:
            raise ValueError(f"unknown method {self.kind!r}; expected one of {METHOD_KINDS}")
        if not self.a > 0:
            raise ValueError(f"wcb concentration must be positive, got {self.a}")

    @property
    def label(self) -> str:
        if self.kind == "wcb":
            return f"wcb({self.a:g})"
        return self.kind


def parse_method(text: str) -> MethodSpec:
    """Parse a method tag like ``"cb"`` or ``"wcb(4)"``."""
    text = text.strip().lower()
    if text.endswith(")") and "(" in text:
        base, _, arg = text[:-1].partition("(")
        if base != "wcb":
            raise ValueError(f"only wcb takes a parameter, got {text!r}")
        try:
            return MethodSpec("wcb", float(arg))
        except ValueError as err:
            raise ValueError(f"bad wcb parameter in {text!r}") from err
    if text == "wcb":
        return MethodSpec("wcb", 1.0)
    return MethodSpec(text)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one coverage experiment."""

    experiment: str
    n: int
    k: int
    alpha: float
    methods: tuple[MethodSpec, ...]
    replications: int
    master_seed: int
    gamma: float = 0.3
    gammas: tuple[float, ...] | None = None  # uneven-batch fractions; None = j/(K(K+1)/2)

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENT_TAGS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENT_TAGS}"
            )
        if self.k < 2:
            raise ValueError(f"K must be >= 2, got {self.k}")
        if self.n < 10 * self.k:
            raise ValueError(f"n must be at least 10*K = {10 * self.k}, got {self.n}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.replications < 100:
            raise ValueError(f"replications must be >= 100, got {self.replications}")
        if not 0 <= self.master_seed <= 2**64 - 1:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        methods = tuple(
            parse_method(m) if isinstance(m, str) else m for m in self.methods
        )
        object.__setattr__(self, "methods", methods)
        if not methods:
            raise ValueError("need at least one method")
        labels = [m.label for m in methods]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate methods in config: {labels}")
        if any(m.kind in ("ob_new", "ob_su", "bj") for m in methods) and self.k < 3:
            raise ValueError("overlapping batching and batched jackknife need K >= 3")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.gammas is not None:
            g = tuple(float(x) for x in self.gammas)
            if len(g) != self.k:
                raise ValueError(f"gammas must have K = {self.k} entries, got {len(g)}")
            if any(x <= 0 for x in g) or abs(sum(g) - 1.0) > 1e-12:
                raise ValueError("gammas must be positive and sum to 1")
            object.__setattr__(self, "gammas", g)

    @property
    def method_labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.methods)


@dataclass(frozen=True)
class MethodResult:
    method: str
    coverage: float
    coverage_se: float
    half_width: float
    half_width_se: float


@dataclass(frozen=True)
class ExperimentReport:
    """Per-method coverage and half-width summaries over R replications."""

    config: ExperimentConfig
    results: tuple[MethodResult, ...]
    replications_used: int
    failures: int
    samples: dict[str, dict[str, np.ndarray]] | None = None

    def result_for(self, method: str) -> MethodResult:
        for row in self.results:
            if row.method == method:
                return row
        raise KeyError(f"no result for method {method!r}")


# ---------------------------------------------------------------------------
# experiment definitions


@dataclass(frozen=True)
class _ExperimentDef:
    tag: str

    def generate(self, stream: RngStream, config: ExperimentConfig) -> fn.WeightedSample:
        if self.tag == "lognormal_quantile":
            return fn.gen_lognormal(stream, config.n)
        if self.tag == "mm1_quantile":
            return fn.gen_mm1_system_times(
                stream,
                config.n,
                warmup=fn.MM1_WARMUP,
                arrival_rate=fn.MM1_ARRIVAL_RATE,
                service_rate=fn.MM1_SERVICE_RATE,
            )
        if self.tag == "logistic":
            return fn.gen_logistic_data(stream, config.n, np.array(LOGISTIC_BETA))
        if self.tag == "input_uncertainty_mm1":
            gen = stream.generator()
            service = gen.exponential(1.0 / fn.IU_SERVICE_RATE, size=config.n)
            return fn.WeightedSample.uniform(service)
        raise ValueError(self.tag)

    def make_functional(self, rep_stream: RngStream) -> fn.Functional:
        if self.tag in ("lognormal_quantile", "mm1_quantile"):
            return fn.WeightedQuantile(fn.QUANTILE_LEVEL)
        if self.tag == "logistic":
            return fn.LogisticCoefficient(1)
        if self.tag == "input_uncertainty_mm1":
            return fn.SimulatedQueueWait(
                rep_stream.substream(_SUB_INNER),
                arrival_rate=fn.IU_ARRIVAL_RATE,
                n_customers=fn.IU_CUSTOMERS,
                n_runs=fn.IU_INNER_RUNS,
            )
        raise ValueError(self.tag)


@dataclass
class _RunContext:
    """Per-config precomputations shared by every replication."""

    config: ExperimentConfig
    experiment: _ExperimentDef
    truth: float
    batch_indices: dict[str, list[np.ndarray]] = field(default_factory=dict)
    gammas_float: np.ndarray | None = None
    v_ob: CovarianceShape | None = None
    ob_critical: float | None = None
    wcb_slots: dict[str, int] = field(default_factory=dict)


def _build_context(config: ExperimentConfig, ob_critical: float | None = None) -> _RunContext:
    ctx = _RunContext(
        config=config,
        experiment=_ExperimentDef(config.experiment),
        truth=fn.truth_for(config.experiment).value,
    )
    kinds = {m.kind for m in config.methods}
    k, n = config.k, config.n
    if "b" in kinds:
        ctx.batch_indices["b"] = materialize(equal_nonoverlapping(k), n)
    if "b_gamma" in kinds:
        if config.gammas is None:
            scheme = proportional_batches(triangular_gammas(k))
        else:
            scheme = proportional_batches(config.gammas)
        ctx.batch_indices["b_gamma"] = materialize(scheme, n)
        ctx.gammas_float = np.array([float(g) for g in scheme.batch_lengths])
    if "bj" in kinds:
        ctx.batch_indices["bj"] = materialize(leave_one_batch_out(k), n)
    if "ob_new" in kinds or "ob_su" in kinds:
        scheme = su_overlapping(k, config.gamma)
        ctx.batch_indices["ob"] = materialize(scheme, n)
        ctx.v_ob = covariance_shape(scheme)
        if "ob_su" in kinds:
            if ob_critical is None:
                ob_critical = calibrate_ob_critical(
                    ctx.v_ob,
                    config.gamma,
                    k,
                    config.alpha,
                    _OB_CALIBRATION_REPS,
                    RngStream(config.master_seed, _OB_CALIBRATION_STREAM),
                )
            ctx.ob_critical = ob_critical
    for pos, m in enumerate(config.methods):
        if m.kind == "wcb":
            ctx.wcb_slots[m.label] = _SUB_WCB_BASE + pos
    return ctx


def _replicate(ctx: _RunContext, rep_index: int) -> dict[str, tuple[bool, float]] | None:
    """One replication: returns per-method (covered, half_width), or None on functional failure."""
    config = ctx.config
    rep = RngStream(config.master_seed, rep_index)
    sample = ctx.experiment.generate(rep.substream(_SUB_DATA), config)
    functional = ctx.experiment.make_functional(rep)

    full_estimate: float | None = None
    ob_values: np.ndarray | None = None

    def full() -> float:
        nonlocal full_estimate
        if full_estimate is None:
            full_estimate = functional(sample)
        return full_estimate

    def batch_values(key: str) -> np.ndarray:
        return np.array([functional(sample.subset(idx)) for idx in ctx.batch_indices[key]])

    def ob_stage1() -> np.ndarray:
        nonlocal ob_values
        if ob_values is None:
            rest = [functional(sample.subset(idx)) for idx in ctx.batch_indices["ob"][1:]]
            ob_values = np.array([full()] + rest)
        return ob_values

    out: dict[str, tuple[bool, float]] = {}
    try:
        for m in config.methods:
            if m.kind == "b":
                interval = ci_standard_batching(batch_values("b"), config.alpha)
            elif m.kind == "b_gamma":
                interval = ci_general_batching(
                    batch_values("b_gamma"), ctx.gammas_float, config.alpha
                )
            elif m.kind == "bj":
                interval = ci_batched_jackknife(batch_values("bj"), config.alpha)
            elif m.kind == "ob_new":
                interval = ci_gs(ob_stage1(), ctx.v_ob, config.alpha)
            elif m.kind == "ob_su":
                interval = ci_ob_su(
                    ob_stage1(), config.gamma, ctx.ob_critical, alpha=config.alpha
                )
            elif m.kind == "cb":
                plan = cheap_bootstrap_plan(rep.substream(_SUB_CB), config.k, sample.n)
                values = [full()] + [
                    functional(sample.reweighted(w)) for w in plan.weights[1:]
                ]
                interval = ci_cheap_bootstrap(np.array(values), config.alpha)
            elif m.kind == "wcb":
                plan = weighted_plan(
                    rep.substream(ctx.wcb_slots[m.label]), config.k, sample.n, m.a
                )
                values = [full()] + [
                    functional(sample.reweighted(w)) for w in plan.weights[1:]
                ]
                interval = ci_weighted_cheap_bootstrap(
                    np.array(values), plan.sigma_w_sq, config.alpha
                )
            else:  # pragma: no cover
                raise AssertionError(m.kind)
            out[m.label] = (interval.covers(ctx.truth), interval.half_width)
    except fn.NonConvergenceError:
        return None
    return out


def run_replication(
    config: ExperimentConfig, rep_index: int
) -> dict[str, tuple[bool, float]] | None:
    """Evaluate every configured method on the dataset of one replication.

    Returns ``{method_label: (covered, half_width)}`` or None if a
    functional failed to converge (the replication is then excluded and
    counted by :func:`run_experiment`).
    """
    if not 0 <= rep_index < config.replications:
        raise ValueError(f"rep_index must lie in [0, {config.replications}), got {rep_index}")
    return _replicate(_build_context(config), rep_index)


def _run_range(config: ExperimentConfig, ob_critical: float | None, lo: int, hi: int):
    ctx = _build_context(config, ob_critical=ob_critical)
    return [(i, _replicate(ctx, i)) for i in range(lo, hi)]


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument, else CHEAPCI_WORKERS, else one per CPU."""
    if workers is None:
        env = os.environ.get("CHEAPCI_WORKERS", "").strip()
        workers = int(env) if env else 0
    if workers < 0:
        raise ValueError(f"worker count must be >= 0, got {workers}")
    if workers == 0:
        workers = os.cpu_count() or 1
    return workers


def run_experiment(
    config: ExperimentConfig,
    keep_samples: bool = False,
    workers: int | None = None,
) -> ExperimentReport:
    """Run all replications and aggregate coverage and half-width per method.

    Results are bit-identical for a given config regardless of the
    worker count. Raises if more than 1% of replications fail with a
    functional error.
    """
    ctx = _build_context(config)  # calibrates the OB critical value once
    r = config.replications
    workers = resolve_workers(workers)

    pairs: list[tuple[int, dict[str, tuple[bool, float]] | None]] = []
    if workers == 1:
        pairs = _run_range(config, ctx.ob_critical, 0, r)
    else:
        bounds = np.linspace(0, r, num=min(4 * workers, r) + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_range, config, ctx.ob_critical, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for future in futures:
                pairs.extend(future.result())

    labels = config.method_labels
    covered = np.full((r, len(labels)), np.nan)
    half = np.full((r, len(labels)), np.nan)
    failures = 0
    for rep_index, result in pairs:
        if result is None:
            failures += 1
            continue
        for j, label in enumerate(labels):
            cov, hw = result[label]
            covered[rep_index, j] = cov
            half[rep_index, j] = hw
    ok = ~np.isnan(half[:, 0])
    used = int(ok.sum())
    if failures > _MAX_FAILURE_RATE * r:
        raise RuntimeError(
            f"functional failure rate too high: {failures}/{r} replications failed"
        )

    rows = []
    for j, label in enumerate(labels):
        p = float(covered[ok, j].mean())
        rows.append(
            MethodResult(
                method=label,
                coverage=p,
                coverage_se=float(np.sqrt(p * (1.0 - p) / used)),
                half_width=float(half[ok, j].mean()),
                half_width_se=float(half[ok, j].std(ddof=1) / np.sqrt(used)),
            )
        )
    samples = None
    if keep_samples:
        samples = {
            label: {"covered": covered[ok, j].astype(bool), "half_width": half[ok, j]}
            for j, label in enumerate(labels)
        }
    return ExperimentReport(
        config=config,
        results=tuple(rows),
        replications_used=used,
        failures=failures,
        samples=samples,
    )


def length_distribution_check(
    source: ExperimentReport | ExperimentConfig,
    method_a: str,
    method_b: str,
    workers: int | None = None,
) -> float:
    """Two-sample Kolmogorov-Smirnov statistic between sqrt(n)-scaled lengths.

    Methods whose intervals share the same limiting length law should
    give a small statistic at matched configs; a real difference in the
    length distribution shows up as a clearly positive value.
    """
    if isinstance(source, ExperimentConfig):
        wanted = {method_a, method_b}
        if not wanted <= set(source.method_labels):
            raise ValueError(f"config does not include methods {wanted}")
        source = run_experiment(source, keep_samples=True, workers=workers)
    if source.samples is None:
        raise ValueError("report was built without keep_samples=True")
    scale = 2.0 * np.sqrt(source.config.n)
    a = np.sort(scale * source.samples[method_a]["half_width"])
    b = np.sort(scale * source.samples[method_b]["half_width"])
    # max |F_a - F_b| over the pooled sample
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.shape[0]
    cdf_b = np.searchsorted(b, pooled, side="right") / b.shape[0]
    return float(np.abs(cdf_a - cdf_b).max())


def _fmt(x: float, precision: int) -> str:
    return f"{x:.{precision}g}"


def report_to_csv(report: ExperimentReport, precision: int = 6) -> str:
    """CSV rows: method, coverage, coverage_se, half_width, half_width_se, R, n, K, alpha, seed."""
    buf = io.StringIO()
    buf.write("method,coverage,coverage_se,half_width,half_width_se,R,n,K,alpha,seed\n")
    cfg = report.config
    for row in report.results:
        buf.write(
            ",".join(
                [
                    row.method,
                    _fmt(row.coverage, precision),
                    _fmt(row.coverage_se, precision),
                    _fmt(row.half_width, precision),
                    _fmt(row.half_width_se, precision),
                    str(report.replications_used),
                    str(cfg.n),
                    str(cfg.k),
                    _fmt(cfg.alpha, precision),
                    str(cfg.master_seed),
                ]
            )
            + "\n"
        )
    return buf.getvalue()


def report_to_markdown(report: ExperimentReport) -> str:
    """Markdown table in the usual coverage / half-length layout."""
    cfg = report.config
    lines = [
        f"Experiment `{cfg.experiment}` (n={cfg.n}, K={cfg.k}, alpha={cfg.alpha:g}, "
        f"R={report.replications_used}, seed={cfg.master_seed})",
        "",
        "| method | coverage | half length |",
        "|---|---|---|",
    ]
    for row in report.results:
        lines.append(
            f"| {row.method} | {100 * row.coverage:.1f}% (±{100 * row.coverage_se:.1f}%) "
            f"| {row.half_width:.4g} (±{row.half_width_se:.1g}) |"
        )
    if report.failures:
        lines.append("")
        lines.append(f"excluded replications (functional failures): {report.failures}")
    return "\n".join(lines) + "\n"
