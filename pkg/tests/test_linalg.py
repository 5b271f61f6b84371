import numpy as np
import pytest

from cheapci import NotSPDError, RngStream, resample_covariance_shape
from cheapci.linalg import (
    check_symmetric,
    cholesky,
    quad_form_inv,
    sample_mvn_zero,
    solve_spd,
)


def random_spd(rng, k):
    a = rng.normal(size=(k, k))
    m = a @ a.T + 1e-3 * np.eye(k)
    return (m + m.T) / 2


def test_cholesky_identity():
    assert np.array_equal(cholesky(np.eye(3)), np.eye(3))


def test_cholesky_hand_checked_2x2():
    lower = cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
    expected = np.array([[2.0, 0.0], [1.0, np.sqrt(2.0)]])
    assert np.allclose(lower, expected, atol=1e-14)


def test_cholesky_round_trip_cb_shape():
    v = resample_covariance_shape("cheap_bootstrap", 3).v
    lower = cholesky(v)
    assert np.allclose(lower @ lower.T, v, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("k", range(2, 21))
def test_cholesky_round_trip_random(k):
    rng = np.random.default_rng(k)
    m = random_spd(rng, k)
    lower = cholesky(m)
    assert np.tril(lower).tolist() == lower.tolist()
    assert np.allclose(lower @ lower.T, m, rtol=1e-10, atol=1e-12 * m.max())


@pytest.mark.parametrize(
    "m",
    [
        np.array([[1.0, 2.0], [2.0, 1.0]]),  # indefinite
        np.array([[1.0, 1.0], [1.0, 1.0]]),  # singular
        np.array([[0.0]]),
        -np.eye(2),
    ],
)
def test_cholesky_rejects_non_spd(m):
    with pytest.raises(NotSPDError):
        cholesky(m)


def test_check_symmetric_rejects_bad_input():
    with pytest.raises(ValueError):
        check_symmetric(np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ValueError):
        check_symmetric(np.ones((2, 3)))
    with pytest.raises(ValueError):
        check_symmetric(np.array([[np.inf, 0], [0, 1.0]]))


def test_solve_identity_and_diagonal():
    b = np.array([3.0, -1.0, 2.0])
    assert np.array_equal(solve_spd(np.eye(3), b), b)
    assert np.allclose(solve_spd(np.diag([2.0, 2.0]), np.ones(2)), [0.5, 0.5])


def test_solve_cb_shape_matches_closed_form_inverse():
    # inverse of the K=4 resampling shape maps the ones vector to e1
    v = resample_covariance_shape("cheap_bootstrap", 4).v
    x = solve_spd(v, np.ones(4))
    assert np.allclose(x, [1.0, 0.0, 0.0, 0.0], atol=1e-12)
    assert x.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("k", [2, 5, 12])
def test_solve_residual_bound(k):
    rng = np.random.default_rng(100 + k)
    m = random_spd(rng, k)
    b = rng.normal(size=k)
    x = solve_spd(m, b)
    resid = np.abs(m @ x - b).max()
    assert resid <= 1e-9 * max(np.abs(b).max(), 1e-30)


def test_quad_form_trivia():
    r = np.array([1.0, -2.0, 2.0])
    assert quad_form_inv(np.eye(3), r) == pytest.approx(float(r @ r), rel=1e-12)
    assert quad_form_inv(np.eye(3), np.zeros(3)) == 0.0
    assert quad_form_inv(np.array([[4.0]]), np.array([2.0])) == pytest.approx(1.0, rel=1e-12)


def test_quad_form_nonnegative_and_scale_law():
    rng = np.random.default_rng(7)
    for _ in range(50):
        k = rng.integers(2, 10)
        m = random_spd(rng, k)
        r = rng.normal(size=k)
        c = float(rng.uniform(0.1, 10.0))
        q = quad_form_inv(m, r)
        assert q >= 0.0
        assert quad_form_inv(c * m, r) == pytest.approx(q / c, rel=1e-10)


def test_mvn_identity_correlation():
    draws = sample_mvn_zero(RngStream(31, 0), np.eye(2), size=100_000)
    corr = np.corrcoef(draws.T)[0, 1]
    assert abs(corr) < 0.02


def test_mvn_matches_target_covariance():
    m = np.array([[1.0, 1.0], [1.0, 2.0]])
    draws = sample_mvn_zero(RngStream(32, 0), m, size=100_000)
    assert draws[:, 1].var() == pytest.approx(2.0, abs=0.05)
    emp = np.cov(draws.T)
    assert np.allclose(emp, m, atol=0.05)


def test_mvn_single_draw_deterministic():
    m = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert np.array_equal(
        sample_mvn_zero(RngStream(4, 4), m), sample_mvn_zero(RngStream(4, 4), m)
    )


def test_mvn_rejects_non_spd():
    with pytest.raises(NotSPDError):
        sample_mvn_zero(RngStream(0), np.array([[1.0, 2.0], [2.0, 1.0]]))
