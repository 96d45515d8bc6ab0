import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from bernoulli_laplace.errors import DomainError
from bernoulli_laplace.limit_laws import (
    GaussianLaw,
    RegimeSpec,
    binpois_convolution,
    consistency_gap,
    gaussian_shift_tv,
    gumbel_cdf,
    gumbel_tail,
    limit_profile,
    normal_cdf,
    poisson_tv,
    poisson_tv_crossing,
)

mpmath.mp.dps = 40


def mp_poisson_tv(l1, l2):
    """Direct high-precision sum well past both means."""
    l1, l2 = mpmath.mpf(l1), mpmath.mpf(l2)
    top = int(max(l1, l2) + 40 * mpmath.sqrt(max(l1, l2)) + 60)
    total = mpmath.mpf(0)
    for j in range(top):
        lj = mpmath.factorial(j)
        total += abs(mpmath.e ** (-l1) * l1**j / lj - mpmath.e ** (-l2) * l2**j / lj)
    return float(total / 2)


@pytest.mark.parametrize("l1,l2", [(2.0, 1.0), (1.5, 1.0), (0.3, 0.001), (25.0, 20.0), (1e-6, 0.0), (7.0, 7.5)])
def test_poisson_tv_against_mpmath(l1, l2):
    assert poisson_tv(l1, l2) == pytest.approx(mp_poisson_tv(l1, l2), abs=1e-10)


@given(st.floats(0.0, 60.0), st.floats(0.0, 60.0))
def test_poisson_tv_properties(a, b):
    v = poisson_tv(a, b)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(poisson_tv(b, a), abs=1e-12)
    assert v == pytest.approx(poisson_tv_crossing(a, b), abs=2e-10)


def test_poisson_tv_subnormal_rate():
    assert poisson_tv_crossing(1.0, 5e-324) == pytest.approx(-math.expm1(-1.0), abs=1e-15)


def test_poisson_tv_huge_rates_use_crossing():
    a, b = 4e12, 4e12 + 2e6
    assert poisson_tv(a, b) == pytest.approx(poisson_tv_crossing(a, b), abs=1e-12)
    # Gaussian limit of the shift: TV -> erf(d / (2 sqrt(2 lam)))
    assert poisson_tv(a, b) == pytest.approx(math.erf(2e6 / (2 * math.sqrt(2 * a))), abs=1e-4)


def test_poisson_tv_validation():
    assert poisson_tv(3.0, 3.0) == 0.0
    with pytest.raises(DomainError):
        poisson_tv(-1.0, 1.0)
    with pytest.raises(DomainError):
        poisson_tv(1.0, 2.0, tol=0.1)


@pytest.mark.parametrize("m", [0.0, 1e-8, 0.3, 1.0, 4.0])
def test_gaussian_shift_tv_against_quadrature(m):
    f = lambda x: abs(stats.norm.pdf(x, m) - stats.norm.pdf(x)) / 2
    expected, _ = integrate.quad(f, -12, 12 + m, points=[m / 2], epsabs=1e-13)
    assert gaussian_shift_tv(m) == pytest.approx(expected, abs=1e-11)
    assert gaussian_shift_tv(m) == pytest.approx(2 * stats.norm.cdf(m / 2) - 1, abs=1e-15)
    assert gaussian_shift_tv(-m) == gaussian_shift_tv(m)


def test_gumbel_functions():
    assert gumbel_cdf(0.0) == pytest.approx(math.exp(-1))
    assert gumbel_tail(0.0) == pytest.approx(1 - math.exp(-1))
    assert gumbel_tail(50.0) == pytest.approx(math.exp(-50.0), rel=1e-12)
    assert normal_cdf(-37.0) == pytest.approx(stats.norm.cdf(-37.0), rel=1e-12)


def test_binpois_against_explicit_convolution():
    x0, q, lam = 7, 0.3, 2.5
    law = binpois_convolution(x0, q, lam)
    js = np.arange(law.support_offset, law.support_offset + law.weights.size)
    expected = [sum(stats.binom.pmf(i, x0, q) * stats.poisson.pmf(j - i, lam) for i in range(min(j, x0) + 1))
                for j in js]
    np.testing.assert_allclose(law.weights, expected, atol=1e-10)
    assert law.mean() == pytest.approx(x0 * q + lam, rel=1e-9)
    assert law.variance() == pytest.approx(x0 * q * (1 - q) + lam, rel=1e-8)


def test_binpois_degenerate_cases():
    law = binpois_convolution(5, 1.0, 0.0)
    assert law.support_offset == 5 and law.weights.tolist() == [1.0]
    with pytest.raises(DomainError):
        binpois_convolution(5, 1.5, 1.0)
    with pytest.raises(DomainError):
        binpois_convolution(-1, 0.5, 1.0)


def test_regime_spec_validation():
    assert RegimeSpec("large").time_form == "quarter-log-n"
    assert RegimeSpec("small").time_form == "half-log-k"
    assert RegimeSpec("critical", 2.0).time_form == "half-log-k"
    for bad in (("critical", None), ("critical", -1.0), ("large", 1.0), ("medium", None)):
        with pytest.raises(DomainError):
            RegimeSpec(*bad)
    with pytest.raises(DomainError):
        RegimeSpec("large", None, "half-log-k")


def test_limit_profile_values():
    assert limit_profile(RegimeSpec("large"), 0.0) == pytest.approx(0.38292, abs=5e-6)
    assert limit_profile(RegimeSpec("critical", 1.0), 0.0) == pytest.approx(0.32975, abs=5e-6)
    assert limit_profile(RegimeSpec("small"), 0.0) == pytest.approx(1 - math.exp(-1))


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_limit_profiles_decrease_in_theta(a, b):
    lo, hi = sorted((a, b))
    for r in (RegimeSpec("large"), RegimeSpec("critical", 0.7), RegimeSpec("small")):
        # Poisson distances carry up to 1e-10 of truncation error each
        assert limit_profile(r, hi) <= limit_profile(r, lo) + 2e-10


@pytest.mark.parametrize("alpha", [0.25, 1.0, 4.0])
def test_time_forms_differ_by_quarter_log_alpha(alpha):
    f1 = RegimeSpec("critical", alpha, "quarter-log-n")
    f2 = RegimeSpec("critical", alpha, "half-log-k")
    for th in (-2.0, -0.5, 0.0, 1.0, 2.0):
        assert limit_profile(f1, th) == pytest.approx(limit_profile(f2, th - 0.25 * math.log(alpha)), abs=2e-10)


def test_consistency_gaps_shrink():
    gauss = [consistency_gap(a, 0.0)[0] for a in (1.0, 10.0, 100.0, 1000.0)]
    gumbel = [consistency_gap(a, 0.0)[1] for a in (1.0, 0.1, 0.01, 0.001)]
    assert all(b < a for a, b in zip(gauss, gauss[1:]))
    assert all(b < a for a, b in zip(gumbel, gumbel[1:]))
    with pytest.raises(DomainError):
        consistency_gap(0.0, 0.0)


def test_gaussian_law():
    g = GaussianLaw(1.0, 2.0)
    assert g.variance == 4.0
    assert g.cdf(1.0) == pytest.approx(0.5)
    assert GaussianLaw(0.0, 0.0).cdf(np.array([-1.0, 0.0])).tolist() == [0.0, 1.0]
    with pytest.raises(DomainError):
        GaussianLaw(0.0, -1.0)
