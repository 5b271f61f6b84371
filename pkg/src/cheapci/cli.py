"""Command-line surface.

Subcommands:

* ``cheapci experiment run --config cfg.json`` — run a coverage
  experiment described by a JSON config and write a CSV or Markdown
  report.
* ``cheapci ci compute --method <tag> ...`` — one interval, either from
  a CSV of precomputed stage-1 estimates or from raw data.
* ``cheapci calibrate ob ...`` — Monte Carlo critical value for the
  overlapping-batching baseline.

Exit codes: 0 success, 1 runtime/numeric failure, 2 usage or config
error. ``CHEAPCI_WORKERS`` caps the number of worker processes
(0 or unset = one per CPU).
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from .estimator import FixedBudgetCI
from .experiments import (
    ExperimentConfig,
    report_to_csv,
    report_to_markdown,
    run_experiment,
)
from .intervals import (
    IntervalResult,
    ci_batched_jackknife,
    ci_cheap_bootstrap,
    ci_general_batching,
    ci_gs,
    ci_ob_su,
    ci_standard_batching,
    ci_weighted_cheap_bootstrap,
    ob_critical_with_se,
)
from .linalg import NotSPDError
from .rng import RngStream
from .schemes import covariance_shape, su_overlapping
from .functionals import weighted_sample_from_csv

_CONFIG_KEYS = {
    "experiment",
    "n",
    "k",
    "alpha",
    "methods",
    "replications",
    "master_seed",
    "gamma",
    "gammas",
    "output",
    "format",
}
_REQUIRED_KEYS = {"experiment", "n", "k", "alpha", "methods", "replications", "master_seed"}


def _load_config(path: str) -> tuple[ExperimentConfig, Path, str]:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise click.UsageError(f"cannot read config {path}: {err}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise click.UsageError(
            f"malformed config {path}: line {err.lineno} column {err.colno}: {err.msg}"
        )
    if not isinstance(doc, dict):
        raise click.UsageError(f"config {path} must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(doc)
    if missing:
        raise click.UsageError(f"missing config keys: {sorted(missing)}")
    fmt = doc.get("format", "csv")
    if fmt not in ("csv", "markdown"):
        raise click.UsageError(f"format must be 'csv' or 'markdown', got {fmt!r}")
    output = Path(doc.get("output", "report.csv"))
    kwargs = {key: doc[key] for key in doc if key not in ("output", "format")}
    kwargs["methods"] = tuple(kwargs["methods"])
    if kwargs.get("gammas") is not None:
        kwargs["gammas"] = tuple(kwargs["gammas"])
    try:
        config = ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as err:
        raise click.UsageError(f"invalid config {path}: {err}")
    return config, output, fmt


def _read_vector_csv(path: str, what: str) -> np.ndarray:
    try:
        rows = [row for row in csv.reader(open(path, newline="")) if any(c.strip() for c in row)]
        values = [float(cell) for row in rows for cell in row if cell.strip()]
    except OSError as err:
        raise click.UsageError(f"cannot read {what} {path}: {err}")
    except ValueError as err:
        raise click.UsageError(f"non-numeric entry in {what} {path}: {err}")
    if not values:
        raise click.UsageError(f"no values in {what} {path}")
    return np.array(values)


def _read_matrix_csv(path: str) -> np.ndarray:
    try:
        rows = [
            [float(cell) for cell in row if cell.strip()]
            for row in csv.reader(open(path, newline=""))
            if any(c.strip() for c in row)
        ]
    except OSError as err:
        raise click.UsageError(f"cannot read matrix {path}: {err}")
    except ValueError as err:
        raise click.UsageError(f"non-numeric entry in matrix {path}: {err}")
    if not rows or any(len(r) != len(rows) for r in rows):
        raise click.UsageError(f"matrix in {path} must be square")
    return np.array(rows)


@click.group()
def main() -> None:
    """Budget-constrained confidence intervals for black-box functionals."""


@main.group()
def experiment() -> None:
    """Coverage/half-length experiments driven by JSON configs."""


@experiment.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(), help="JSON config file.")
@click.option("--workers", type=int, default=None, help="Worker processes (default: CHEAPCI_WORKERS or CPU count).")
@click.option("--precision", type=int, default=6, show_default=True, help="Significant digits in CSV output.")
def experiment_run(config_path: str, workers: int | None, precision: int) -> None:
    """Run the experiment described by --config and write its report."""
    config, output, fmt = _load_config(config_path)
    try:
        report = run_experiment(config, workers=workers)
    except (ValueError, NotSPDError, RuntimeError) as err:
        raise click.ClickException(str(err))
    text = report_to_csv(report, precision=precision) if fmt == "csv" else report_to_markdown(report)
    output.write_text(text)
    click.echo(f"wrote {fmt} report for {config.experiment} (K={config.k}) to {output}")
    click.echo(report_to_markdown(report), nl=False)


_CI_METHODS = ("b", "b_gamma", "bj", "cb", "wcb", "gs", "ob_new", "ob_su")


@main.group("ci")
def ci_group() -> None:
    """Single confidence intervals from estimates or raw data."""


@ci_group.command("compute")
@click.option("--method", required=True, type=click.Choice(_CI_METHODS), help="Interval formula.")
@click.option("--estimates", type=click.Path(), default=None, help="CSV with the K stage-1 estimates (slot 0 = original-data estimate where applicable).")
@click.option("--data", "data_path", type=click.Path(), default=None, help="CSV of raw observations; stage-1 estimates are built from it.")
@click.option("--functional", "functional_tag", default="mean", show_default=True, help="With --data: 'mean' or 'quantile:<p>'.")
@click.option("--k", type=int, default=None, help="Evaluation budget (required with --data).")
@click.option("--alpha", type=float, default=0.1, show_default=True)
@click.option("--gamma", type=float, default=0.3, show_default=True, help="Overlapping batch fraction (ob methods).")
@click.option("--gammas", "gammas_path", type=click.Path(), default=None, help="CSV of batch fractions (b_gamma).")
@click.option("--sigma-w-sq", type=float, default=None, help="Limiting weight variance (wcb).")
@click.option("--sigma", "sigma_path", type=click.Path(), default=None, help="CSV with the KxK covariance shape (gs).")
@click.option("--critical", type=float, default=None, help="Critical value from 'calibrate ob' (ob_su with --estimates).")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for resampling plans (--data with cb/wcb).")
@click.option("--precision", type=int, default=6, show_default=True)
def ci_compute(
    method: str,
    estimates: str | None,
    data_path: str | None,
    functional_tag: str,
    k: int | None,
    alpha: float,
    gamma: float,
    gammas_path: str | None,
    sigma_w_sq: float | None,
    sigma_path: str | None,
    critical: float | None,
    seed: int,
    precision: int,
) -> None:
    """Print center, half_width, lower, upper for one interval."""
    if (estimates is None) == (data_path is None):
        raise click.UsageError("provide exactly one of --estimates or --data")
    try:
        if estimates is not None:
            result = _ci_from_estimates(
                method, estimates, alpha, gamma, gammas_path, sigma_w_sq, sigma_path, critical
            )
        else:
            result = _ci_from_data(
                method, data_path, functional_tag, k, alpha, gamma, gammas_path, sigma_w_sq, seed
            )
    except NotSPDError:
        raise click.ClickException("covariance shape not positive definite")
    except ValueError as err:
        raise click.ClickException(str(err))
    click.echo("center,half_width,lower,upper")
    click.echo(
        ",".join(
            f"{x:.{precision}g}"
            for x in (result.center, result.half_width, result.lower, result.upper)
        )
    )


def _ci_from_estimates(
    method: str,
    estimates_path: str,
    alpha: float,
    gamma: float,
    gammas_path: str | None,
    sigma_w_sq: float | None,
    sigma_path: str | None,
    critical: float | None,
) -> IntervalResult:
    y = _read_vector_csv(estimates_path, "estimates")
    if method == "b":
        return ci_standard_batching(y, alpha)
    if method == "b_gamma":
        if gammas_path is None:
            raise click.UsageError("method b_gamma requires --gammas")
        return ci_general_batching(y, _read_vector_csv(gammas_path, "gammas"), alpha)
    if method == "bj":
        return ci_batched_jackknife(y, alpha)
    if method == "cb":
        return ci_cheap_bootstrap(y, alpha)
    if method == "wcb":
        if sigma_w_sq is None:
            raise click.UsageError("method wcb requires --sigma-w-sq")
        return ci_weighted_cheap_bootstrap(y, sigma_w_sq, alpha)
    if method == "gs":
        if sigma_path is None:
            raise click.UsageError("method gs requires --sigma")
        sigma = _read_matrix_csv(sigma_path)
        if sigma.shape[0] != y.shape[0]:
            raise click.ClickException(
                f"dimension mismatch: {y.shape[0]} estimates but {sigma.shape[0]}x{sigma.shape[1]} covariance"
            )
        return ci_gs(y, sigma, alpha)
    if method == "ob_new":
        return ci_gs(y, covariance_shape(su_overlapping(y.shape[0], gamma)), alpha)
    if method == "ob_su":
        if critical is None:
            raise click.UsageError("method ob_su with --estimates requires --critical (see 'cheapci calibrate ob')")
        return ci_ob_su(y, gamma, critical, alpha=alpha)
    raise AssertionError(method)


def _ci_from_data(
    method: str,
    data_path: str,
    functional_tag: str,
    k: int | None,
    alpha: float,
    gamma: float,
    gammas_path: str | None,
    sigma_w_sq: float | None,
    seed: int,
) -> IntervalResult:
    if method == "gs":
        raise click.UsageError("method gs needs precomputed --estimates plus --sigma")
    if k is None:
        raise click.UsageError("--data requires --k (the evaluation budget)")
    sample = weighted_sample_from_csv(data_path)
    gammas = None
    if gammas_path is not None:
        gammas = tuple(_read_vector_csv(gammas_path, "gammas"))
    dirichlet_a = 1.0
    if method == "wcb" and sigma_w_sq is not None:
        dirichlet_a = 1.0 / sigma_w_sq
    est = FixedBudgetCI(
        functional=functional_tag,
        method=method,
        k=k,
        alpha=alpha,
        gamma=gamma,
        gammas=gammas,
        dirichlet_a=dirichlet_a,
        random_state=RngStream(seed, 0),
    )
    est.fit(sample.points if sample.dim > 1 else sample.scalar_values())
    return est.result_


@main.group()
def calibrate() -> None:
    """Monte Carlo calibration of baseline critical values."""


@calibrate.command("ob")
@click.option("--gamma", type=float, required=True, help="Batch length fraction in (0, 1).")
@click.option("--k", type=int, required=True, help="Evaluation budget (>= 3).")
@click.option("--alpha", type=float, default=0.1, show_default=True)
@click.option("--reps", type=int, default=10**6, show_default=True, help="Monte Carlo replications (>= 1e5).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--precision", type=int, default=6, show_default=True)
def calibrate_ob(gamma: float, k: int, alpha: float, reps: int, seed: int, precision: int) -> None:
    """Critical value of the overlapping-batching pivotal statistic."""
    if reps < 10**5:
        raise click.UsageError(f"mc_reps too small: need at least 1e5, got {reps}")
    try:
        shape = covariance_shape(su_overlapping(k, gamma))
        value, se = ob_critical_with_se(
            shape, gamma, k, alpha, reps, RngStream(seed, 0)
        )
    except (ValueError, NotSPDError) as err:
        raise click.ClickException(str(err))
    click.echo(f"critical {value:.{precision}g}")
    click.echo(f"mc_se {se:.3g}")


if __name__ == "__main__":
    sys.exit(main())
