import numpy as np
import pytest

from cheapci import (
    ExperimentConfig,
    length_distribution_check,
    parse_method,
    report_to_csv,
    report_to_markdown,
    run_experiment,
    run_replication,
)
from cheapci.experiments import MethodSpec, resolve_workers


def small_config(**overrides):
    base = dict(
        experiment="lognormal_quantile",
        n=400,
        k=4,
        alpha=0.1,
        methods=("b", "cb"),
        replications=120,
        master_seed=99,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# ------------------------------------------------------------- method parsing

def test_parse_method_plain_and_parameterized():
    assert parse_method("b") == MethodSpec("b")
    assert parse_method("CB") == MethodSpec("cb")
    assert parse_method("wcb") == MethodSpec("wcb", 1.0)
    assert parse_method("wcb(4)") == MethodSpec("wcb", 4.0)
    assert parse_method("wcb(0.25)").label == "wcb(0.25)"


@pytest.mark.parametrize("bad", ["nope", "b(2)", "wcb()", "wcb(x)", "wcb(-1)"])
def test_parse_method_rejects(bad):
    with pytest.raises(ValueError):
        parse_method(bad)


# ---------------------------------------------------------------- config rules

def test_config_accepts_strings_and_specs():
    cfg = small_config(methods=("b", MethodSpec("wcb", 2.0)))
    assert cfg.method_labels == ("b", "wcb(2)")


def test_config_rejects_small_k():
    with pytest.raises(ValueError, match="K must be >= 2"):
        small_config(k=1)


@pytest.mark.parametrize(
    "overrides",
    [
        {"experiment": "mystery"},
        {"n": 30},  # below 10*K
        {"alpha": 0.0},
        {"replications": 99},
        {"methods": ()},
        {"methods": ("b", "b")},
        {"methods": ("bj",), "k": 2},
        {"methods": ("ob_su",), "k": 2},
        {"gamma": 1.0},
        {"gammas": (0.5, 0.5)},  # wrong length for k=4
        {"master_seed": -1},
    ],
)
def test_config_rejects_bad_values(overrides):
    with pytest.raises(ValueError):
        small_config(**overrides)


def test_config_gammas_must_sum_to_one():
    with pytest.raises(ValueError):
        small_config(gammas=(0.1, 0.2, 0.3, 0.5))
    cfg = small_config(methods=("b_gamma",), gammas=(0.1, 0.2, 0.3, 0.4))
    assert cfg.gammas == (0.1, 0.2, 0.3, 0.4)


# ------------------------------------------------------------- run_replication

def test_replication_deterministic():
    cfg = small_config()
    a = run_replication(cfg, 3)
    b = run_replication(cfg, 3)
    assert a == b
    assert set(a) == {"b", "cb"}
    for covered, half in a.values():
        assert isinstance(covered, bool)
        assert half >= 0


def test_replication_index_bounds():
    cfg = small_config()
    with pytest.raises(ValueError):
        run_replication(cfg, -1)
    with pytest.raises(ValueError):
        run_replication(cfg, cfg.replications)


def test_replications_differ_across_indices():
    cfg = small_config()
    a = run_replication(cfg, 0)
    b = run_replication(cfg, 1)
    assert a != b


# -------------------------------------------------------------- run_experiment

@pytest.fixture(scope="module")
def smoke_report():
    cfg = small_config(methods=("b", "cb", "bj"))
    return run_experiment(cfg, keep_samples=True, workers=1), cfg


def test_experiment_report_contents(smoke_report):
    report, cfg = smoke_report
    assert report.replications_used == cfg.replications
    assert report.failures == 0
    assert {r.method for r in report.results} == {"b", "cb", "bj"}
    for row in report.results:
        assert 0.0 <= row.coverage <= 1.0
        expected_se = np.sqrt(row.coverage * (1 - row.coverage) / report.replications_used)
        assert row.coverage_se == pytest.approx(expected_se, rel=1e-12)
        assert row.half_width > 0
        assert row.half_width_se > 0
    # desk-scale smoke run should still be in the right coverage ballpark
    assert report.result_for("b").coverage > 0.75


def test_keep_samples_shapes(smoke_report):
    report, cfg = smoke_report
    for label in cfg.method_labels:
        arrs = report.samples[label]
        assert arrs["half_width"].shape == (report.replications_used,)
        assert arrs["covered"].dtype == bool


def test_rerun_bit_identical(smoke_report):
    report, cfg = smoke_report
    again = run_experiment(cfg, keep_samples=True, workers=1)
    assert report_to_csv(again) == report_to_csv(report)
    for label in cfg.method_labels:
        assert np.array_equal(
            again.samples[label]["half_width"], report.samples[label]["half_width"]
        )


def test_worker_count_does_not_change_results(smoke_report):
    report, cfg = smoke_report
    parallel = run_experiment(cfg, keep_samples=True, workers=2)
    assert report_to_csv(parallel) == report_to_csv(report)


def test_csv_layout(smoke_report):
    report, cfg = smoke_report
    text = report_to_csv(report)
    lines = text.strip().split("\n")
    assert lines[0] == "method,coverage,coverage_se,half_width,half_width_se,R,n,K,alpha,seed"
    assert len(lines) == 1 + len(cfg.methods)
    first = lines[1].split(",")
    assert first[0] == "b"
    assert int(first[5]) == report.replications_used
    assert int(first[6]) == cfg.n
    assert int(first[7]) == cfg.k
    assert first[9] == str(cfg.master_seed)


def test_markdown_layout(smoke_report):
    report, _ = smoke_report
    text = report_to_markdown(report)
    assert "| method | coverage | half length |" in text
    assert "| b |" in text


def test_wcb_method_runs():
    cfg = small_config(methods=("wcb(4)", "cb"), replications=100)
    report = run_experiment(cfg, workers=1)
    assert report.result_for("wcb(4)").half_width > 0


def test_input_uncertainty_experiment_runs():
    cfg = ExperimentConfig(
        experiment="input_uncertainty_mm1",
        n=100,
        k=4,
        alpha=0.1,
        methods=("b", "cb"),
        replications=100,
        master_seed=5,
    )
    report = run_experiment(cfg, workers=1)
    assert report.result_for("cb").coverage > 0.5


def test_failure_rate_propagates():
    # logistic with 10 features on 20 points separates essentially always
    cfg = ExperimentConfig(
        experiment="logistic",
        n=20,
        k=2,
        alpha=0.1,
        methods=("cb",),
        replications=100,
        master_seed=1,
    )
    with pytest.raises(RuntimeError, match="failure rate"):
        run_experiment(cfg, workers=1)


# ------------------------------------------------------ length distributions

def test_length_check_identical_method_is_zero(smoke_report):
    report, _ = smoke_report
    assert length_distribution_check(report, "b", "b") == 0.0


def test_length_check_requires_samples():
    cfg = small_config()
    report = run_experiment(cfg, workers=1)
    with pytest.raises(ValueError):
        length_distribution_check(report, "b", "cb")


def test_length_check_accepts_config():
    cfg = small_config(replications=100)
    ks = length_distribution_check(cfg, "b", "cb", workers=1)
    assert 0.0 <= ks <= 1.0


def test_length_check_unknown_method(smoke_report):
    report, _ = smoke_report
    with pytest.raises(KeyError):
        length_distribution_check(report, "b", "ob_new")


# ---------------------------------------------------------------- workers env

def test_resolve_workers(monkeypatch):
    assert resolve_workers(3) == 3
    monkeypatch.setenv("CHEAPCI_WORKERS", "5")
    assert resolve_workers() == 5
    monkeypatch.setenv("CHEAPCI_WORKERS", "0")
    assert resolve_workers() >= 1
    monkeypatch.delenv("CHEAPCI_WORKERS")
    assert resolve_workers() >= 1
    with pytest.raises(ValueError):
        resolve_workers(-2)
