import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special, stats

from shockmetrics.dist import (
    DistributionSpec,
    DomainError,
    InvalidParameterError,
    cdf,
    check_nbu,
    check_nbue,
    default_aging_grid,
    mean,
    pmf_support,
    reg_lower_inc_gamma,
    reg_upper_inc_gamma,
    sample,
    survival,
    tail_integral,
)
from shockmetrics.renewal import integrate_survival

CONTINUOUS_SPECS = [
    DistributionSpec.weibull(2.0, 1.0),
    DistributionSpec.weibull(0.7, 3.0),
    DistributionSpec.gamma(2.0, 1.0),
    DistributionSpec.gamma(0.5, 2.0),
    DistributionSpec.gamma(3.5, 0.4),
    DistributionSpec.exponential(2.0),
    DistributionSpec.uniform(1.0, 2.0),
]
ALL_SPECS = CONTINUOUS_SPECS + [
    DistributionSpec.binomial(8, 0.3),
    DistributionSpec.dirac(3.0),
    DistributionSpec.empty(),
]


def scipy_law(d):
    if d.family == "weibull":
        return stats.weibull_min(d.p1, scale=d.p2)
    if d.family == "gamma":
        return stats.gamma(d.p1, scale=1.0 / d.p2)
    if d.family == "exponential":
        return stats.expon(scale=1.0 / d.p1)
    if d.family == "uniform":
        return stats.uniform(d.p1, d.p2 - d.p1)
    if d.family == "binomial":
        return stats.binom(int(d.p1), d.p2)
    raise ValueError(d.family)


def test_weibull_cdf_at_one():
    assert cdf(DistributionSpec.weibull(2.0, 1.0), 1.0) == pytest.approx(1 - math.exp(-1), abs=1e-15)


def test_gamma2_cdf_closed_form():
    assert cdf(DistributionSpec.gamma(2.0, 1.0), 1.0) == pytest.approx(1 - 2 * math.exp(-1), abs=1e-14)


@pytest.mark.parametrize("d", CONTINUOUS_SPECS, ids=str)
def test_continuous_cdf_zero_at_origin(d):
    assert cdf(d, 0.0) == 0.0


@pytest.mark.parametrize("d", CONTINUOUS_SPECS + [DistributionSpec.binomial(8, 0.3)], ids=str)
def test_cdf_matches_scipy(d):
    x = np.linspace(0.0, 12.0, 97)
    np.testing.assert_allclose(cdf(d, x), scipy_law(d).cdf(x), atol=1e-13)


@pytest.mark.parametrize("d", ALL_SPECS, ids=str)
def test_cdf_plus_survival_is_one(d):
    x = np.random.default_rng(3).uniform(0.0, 20.0, 1000)
    assert np.max(np.abs(cdf(d, x) + survival(d, x) - 1.0)) <= 1e-14


@pytest.mark.parametrize("d", ALL_SPECS, ids=str)
def test_cdf_monotone_and_bounded(d):
    x = np.linspace(0.0, 30.0, 601)
    f = cdf(d, x)
    assert np.all(np.diff(f) >= -1e-15)
    assert f.min() >= 0.0 and f.max() <= 1.0


def test_empty_law():
    e = DistributionSpec.empty()
    assert survival(e, 1e9) == 1.0
    assert math.isinf(mean(e))
    with pytest.raises(DomainError):
        sample(e, np.random.default_rng(0))


def test_means():
    assert mean(DistributionSpec.gamma(2.0, 4.0)) == 0.5
    assert mean(DistributionSpec.dirac(3.0)) == 3.0
    assert mean(DistributionSpec.weibull(2.0, 1.0)) == pytest.approx(0.886226925452758, abs=1e-14)


@pytest.mark.parametrize("d", CONTINUOUS_SPECS, ids=str)
def test_mean_equals_survival_integral(d):
    value, _ = integrate_survival(lambda t: float(survival(d, t)), abs_tol=1e-11, scale=mean(d))
    assert value == pytest.approx(mean(d), rel=1e-8)


@pytest.mark.parametrize(
    "d, bad",
    [
        (("weibull", 0.0, 1.0), "shape"),
        (("gamma", 1.0, -1.0), "rate"),
        (("exponential", 0.0), "rate"),
        (("uniform", 2.0, 1.0), "a < b"),
        (("binomial", 2.5, 0.5), "integer"),
        (("binomial", 3, 1.5), "p"),
        (("dirac", -1.0), "atom"),
        (("pareto", 1.0, 1.0), "unknown"),
    ],
)
def test_invalid_parameters(d, bad):
    with pytest.raises(InvalidParameterError, match=bad):
        DistributionSpec(*d)


def test_from_dict_roundtrip_and_unknown_keys():
    d = DistributionSpec.gamma(2.5, 1.5)
    assert DistributionSpec.from_dict(d.to_dict()) == d
    assert DistributionSpec.from_dict({"family": "binomial", "p": 0.2}, n=4) == DistributionSpec.binomial(4, 0.2)
    with pytest.raises(InvalidParameterError, match="unknown keys"):
        DistributionSpec.from_dict({"family": "gamma", "shape": 1, "rate": 1, "scale": 2})
    with pytest.raises(InvalidParameterError, match="needs parameter"):
        DistributionSpec.from_dict({"family": "gamma", "shape": 1})


def test_pmf_support():
    ks, w = pmf_support(DistributionSpec.binomial(8, 0.3))
    np.testing.assert_allclose(w, stats.binom(8, 0.3).pmf(ks), atol=1e-15)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    ks, w = pmf_support(DistributionSpec.dirac(2.0))
    assert list(ks) == [2.0] and list(w) == [1.0]


def test_sample_deterministic():
    d = DistributionSpec.weibull(2.0, 1.0)
    a = sample(d, np.random.default_rng(11), 100)
    b = sample(d, np.random.default_rng(11), 100)
    np.testing.assert_array_equal(a, b)


def test_sample_exponential_mean():
    x = sample(DistributionSpec.exponential(2.0), np.random.default_rng(5), 10**6)
    assert abs(x.mean() - 0.5) < 0.002


def test_sample_weibull_ks_million():
    n = 10**6
    x = sample(DistributionSpec.weibull(2.0, 1.0), np.random.default_rng(6), n)
    d = stats.kstest(x, lambda t: cdf(DistributionSpec.weibull(2.0, 1.0), t)).statistic
    assert d < 1.63 / math.sqrt(n)


@pytest.mark.parametrize("d", CONTINUOUS_SPECS + [DistributionSpec.binomial(8, 0.3)], ids=str)
def test_sample_ks_per_family(d):
    x = sample(d, np.random.default_rng(7), 10**5)
    if d.family == "binomial":
        # discrete law: compare the empirical pmf instead of a KS band
        ks, w = pmf_support(d)
        counts = np.bincount(x.astype(int), minlength=len(ks)) / len(x)
        assert np.max(np.abs(counts - w)) < 0.005
    else:
        assert stats.kstest(x, lambda t: cdf(d, t)).pvalue > 0.01


# incomplete gamma -----------------------------------------------------------


def test_inc_gamma_identities():
    assert reg_lower_inc_gamma(1.0, 1.0) == pytest.approx(1 - math.exp(-1), abs=1e-15)
    assert reg_lower_inc_gamma(0.5, 1.0) == pytest.approx(math.erf(1.0), abs=1e-15)
    assert reg_lower_inc_gamma(7.3, 0.0) == 0.0
    with pytest.raises(DomainError):
        reg_lower_inc_gamma(0.0, 1.0)
    with pytest.raises(DomainError):
        reg_lower_inc_gamma(1.0, -1.0)


@pytest.mark.parametrize("a, x", [(0.5, 1.0), (2.0, 1.0), (3.5, 20.0), (150.0, 140.0), (480.0, 520.0),
                                  (10.0, 9000.0), (0.1, 1e-5)])
def test_inc_gamma_against_mpmath(a, x):
    want = float(mpmath.gammainc(a, 0, x, regularized=True))
    assert reg_lower_inc_gamma(a, x) == pytest.approx(want, abs=1e-12)


@given(st.floats(1e-3, 500.0), st.floats(0.0, 1e4))
def test_inc_gamma_against_scipy(a, x):
    assert abs(reg_lower_inc_gamma(a, x) - special.gammainc(a, x)) <= 1e-12
    assert abs(reg_lower_inc_gamma(a, x) + reg_upper_inc_gamma(a, x) - 1.0) <= 1e-15


@given(st.floats(0.05, 200.0), st.floats(0.0, 300.0))
def test_inc_gamma_recurrence(a, x):
    step = math.exp(a * math.log(x) - x - math.lgamma(a + 1)) if x > 0 else 0.0
    assert abs(reg_lower_inc_gamma(a + 1, x) - (reg_lower_inc_gamma(a, x) - step)) <= 1e-10


@given(st.floats(0.05, 100.0), st.floats(0.0, 200.0), st.floats(0.0, 5.0))
def test_inc_gamma_monotone_in_x(a, x, dx):
    assert reg_lower_inc_gamma(a, x + dx) >= reg_lower_inc_gamma(a, x) - 1e-15


# aging classes --------------------------------------------------------------

GRID = np.arange(0.0, 10.01, 0.5)


def test_nbu_examples():
    e = check_nbu(DistributionSpec.exponential(3.0), GRID)
    assert e.holds and e.worst_violation <= 1e-15
    assert check_nbu(DistributionSpec.gamma(2.0, 1.0), GRID, tol=1e-12).holds
    bad = check_nbu(DistributionSpec.gamma(0.5, 1.0), GRID, tol=1e-12)
    assert not bad.holds and bad.worst_violation > 0.01


def test_nbue_examples():
    assert check_nbue(DistributionSpec.exponential(3.0), GRID).holds
    assert check_nbue(DistributionSpec.gamma(2.0, 1.0), GRID).holds
    assert not check_nbue(DistributionSpec.gamma(0.5, 1.0), GRID).holds
    with pytest.raises(DomainError):
        check_nbue(DistributionSpec.empty(), GRID)


def test_exponential_nbue_equality():
    d = DistributionSpec.exponential(0.4)
    for z in GRID:
        assert tail_integral(d, float(z)) == pytest.approx(mean(d) * float(survival(d, z)), abs=1e-12)


@pytest.mark.parametrize("d", [s for s in ALL_SPECS if s.family != "empty"], ids=str)
def test_nbu_implies_nbue(d):
    grid = default_aging_grid(d)
    if check_nbu(d, grid).holds:
        assert check_nbue(d, grid).holds


def test_tail_integral_closed_forms_agree_with_quadrature():
    for d in (DistributionSpec.uniform(1.0, 3.0), DistributionSpec.binomial(5, 0.4), DistributionSpec.dirac(2.0)):
        for z in (0.0, 0.5, 1.7, 2.5, 6.0):
            closed = tail_integral(d, z)
            # piecewise constant or linear survival: integrate on a fine grid
            x = np.linspace(z, z + 20.0, 200001)
            numeric = np.trapezoid(survival(d, x), x)
            assert closed == pytest.approx(numeric, abs=2e-4)
