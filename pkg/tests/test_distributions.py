import numpy as np
import pytest

from cheapci import (
    RngStream,
    chi2_cdf,
    chi2_quantile,
    normal_cdf,
    normal_quantile,
    t_cdf,
    t_quantile,
)
from cheapci.distributions import (
    exponential,
    lognormal,
    sample_dirichlet,
    sample_multinomial_counts,
    standard_normal,
)

from oracles import normal_quantile_oracle, t_quantile_oracle


# Values frozen from the quadrature/bisection oracle in oracles.py,
# cross-checked against published t tables.
FROZEN_T = {
    (5, 0.95): 2.015048,
    (16, 0.95): 1.745884,
    (1, 0.975): 12.706205,
    (2, 0.95): 2.919986,
    (10, 0.975): 2.228139,
    (30, 0.975): 2.042272,
}
FROZEN_Z = {0.7: 0.524401, 0.975: 1.959964, 0.9: 1.281552}


@pytest.mark.parametrize("df,p", sorted(FROZEN_T))
def test_t_quantile_frozen_values(df, p):
    assert t_quantile(df, p) == pytest.approx(FROZEN_T[(df, p)], abs=1e-6)


@pytest.mark.parametrize("df,p", [(5, 0.95), (11, 0.2), (3, 0.8), (25, 0.99), (1, 0.6)])
def test_t_quantile_matches_oracle(df, p):
    assert t_quantile(df, p) == pytest.approx(t_quantile_oracle(df, p), abs=1e-6)


def test_t_quantile_symmetry_and_median():
    assert t_quantile(11, 0.5) == 0.0
    assert t_quantile(7, 0.25) == pytest.approx(-t_quantile(7, 0.75), abs=1e-12)


def test_t_quantile_strictly_increasing():
    grid = np.linspace(0.01, 0.99, 50)
    for df in (1, 4, 17):
        values = [t_quantile(df, p) for p in grid]
        assert all(a < b for a, b in zip(values, values[1:]))


def test_t_quantile_cdf_round_trip():
    for df in range(1, 31):
        for p in np.arange(0.01, 0.995, 0.01):
            assert t_cdf(df, t_quantile(df, float(p))) == pytest.approx(p, abs=1e-7)


def test_t_approaches_normal_for_large_df():
    for p in (0.9, 0.95, 0.975):
        assert abs(t_quantile(10**6, p) - normal_quantile(p)) < 1e-3


@pytest.mark.parametrize("p", sorted(FROZEN_Z))
def test_normal_quantile_frozen_values(p):
    assert normal_quantile(p) == pytest.approx(FROZEN_Z[p], abs=1e-6)


def test_normal_quantile_matches_oracle():
    for p in (0.01, 0.3, 0.5, 0.7, 0.999):
        expected = 0.0 if p == 0.5 else normal_quantile_oracle(p)
        assert normal_quantile(p) == pytest.approx(expected, abs=1e-6)


def test_normal_round_trip():
    for p in np.arange(0.05, 0.99, 0.05):
        assert normal_cdf(normal_quantile(float(p))) == pytest.approx(p, abs=1e-9)


def test_chi2_round_trip_and_median():
    for df in (1, 5, 29):
        for p in (0.1, 0.5, 0.9):
            assert chi2_cdf(df, chi2_quantile(df, p)) == pytest.approx(p, abs=1e-9)
    assert chi2_quantile(10, 0.5) < 10 < chi2_quantile(10, 0.6)


@pytest.mark.parametrize("bad_p", [0.0, 1.0, -0.1, 1.7, float("nan")])
def test_quantiles_reject_bad_p(bad_p):
    with pytest.raises(ValueError):
        t_quantile(5, bad_p)
    with pytest.raises(ValueError):
        normal_quantile(bad_p)


def test_t_quantile_rejects_bad_df():
    with pytest.raises(ValueError):
        t_quantile(0, 0.5)
    with pytest.raises(TypeError):
        t_quantile(2.5, 0.5)


def test_samplers_reproducible():
    s = RngStream(7, 3)
    assert np.array_equal(standard_normal(s, 50), standard_normal(s, 50))
    assert np.array_equal(exponential(s, 2.0, 50), exponential(s, 2.0, 50))
    assert np.array_equal(lognormal(s, 50), lognormal(s, 50))
    assert np.array_equal(sample_multinomial_counts(s, 20), sample_multinomial_counts(s, 20))
    assert np.array_equal(sample_dirichlet(s, 1.0, 20), sample_dirichlet(s, 1.0, 20))


def test_sampler_moments():
    s = RngStream(11, 0)
    z = standard_normal(s.substream(0), 200_000)
    assert z.mean() == pytest.approx(0.0, abs=0.01)
    assert z.std() == pytest.approx(1.0, abs=0.01)
    e = exponential(s.substream(1), 4.0, 200_000)
    assert e.mean() == pytest.approx(0.25, abs=0.005)
    x = lognormal(s.substream(2), 200_000)
    assert np.median(x) == pytest.approx(1.0, abs=0.02)
    assert (x > 0).all()


def test_exponential_rejects_bad_rate():
    with pytest.raises(ValueError):
        exponential(RngStream(0), 0.0, 5)


def test_multinomial_single_trial():
    assert sample_multinomial_counts(RngStream(1, 2), 1).tolist() == [1]


def test_multinomial_counts_sum_to_n():
    for i in range(20):
        counts = sample_multinomial_counts(RngStream(3, i), 37)
        assert counts.sum() == 37
        assert (counts >= 0).all()
        assert counts.shape == (37,)


def test_multinomial_marginal_mean():
    # count_1 is Binomial(10, 1/10): mean 1
    total = 0
    reps = 100_000
    parent = RngStream(17, 0)
    for i in range(reps):
        total += sample_multinomial_counts(parent.substream(i), 10)[0]
    assert total / reps == pytest.approx(1.0, abs=0.03)


def test_multinomial_rejects_zero():
    with pytest.raises(ValueError):
        sample_multinomial_counts(RngStream(0), 0)


def test_dirichlet_basic_properties():
    w = sample_dirichlet(RngStream(5, 9), 2.0, 2)
    assert w.shape == (2,)
    assert (w >= 0).all()
    assert w.sum() == pytest.approx(1.0, abs=1e-15)


def test_dirichlet_scaled_variance():
    # Var(n W_1) = (n-1)/(n a + 1)
    n, reps = 200, 20_000
    parent = RngStream(21, 0)
    for a, expected, tol in ((1.0, 199 / 201, 0.04), (4.0, 199 / 801, 0.02)):
        w1 = np.array(
            [sample_dirichlet(parent.substream(i), a, n)[0] for i in range(reps)]
        )
        assert np.var(n * w1) == pytest.approx(expected, abs=tol)


def test_dirichlet_rejects_bad_args():
    with pytest.raises(ValueError):
        sample_dirichlet(RngStream(0), 0.0, 5)
    with pytest.raises(ValueError):
        sample_dirichlet(RngStream(0), 1.0, 1)
