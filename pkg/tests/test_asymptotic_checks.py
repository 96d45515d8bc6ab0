import math

import numpy as np
import pytest
from scipy import stats

from bernoulli_laplace import asymptotic_checks as ac
from bernoulli_laplace.chain_model import ChainParams
from bernoulli_laplace.errors import DomainError
from bernoulli_laplace.limit_laws import GaussianLaw
from bernoulli_laplace.rng import RngStream


def test_rescale_state():
    p = ChainParams(10_000, 5000)
    assert ac.rescale_state(p, 2550) == pytest.approx(2.0)
    assert ac.rescale_state(p, 2500) == 0.0
    with pytest.raises(DomainError):
        ac.rescale_state(p, 5001)


def test_ou_marginal():
    law = ac.ou_marginal(1.5, 0.0)
    assert law.mean == 1.5 and law.std == 0.0
    far = ac.ou_marginal(1.5, 30.0)
    assert far.mean == pytest.approx(0.0, abs=1e-20) and far.std == pytest.approx(1.0)
    law = ac.ou_marginal(2.0, 0.25)
    assert law.mean == pytest.approx(2 * math.exp(-0.5)) and law.variance == pytest.approx(1 - math.exp(-1))
    with pytest.raises(DomainError):
        ac.ou_marginal(0.0, -0.1)


def test_lattice_cells_against_scipy():
    law = GaussianLaw(0.3, 0.8)
    pts = np.linspace(-3, 3, 13)
    masses = ac.lattice_cell_masses(law, pts, 0.5)
    expected = stats.norm.cdf(pts + 0.25, 0.3, 0.8) - stats.norm.cdf(pts - 0.25, 0.3, 0.8)
    np.testing.assert_allclose(masses, expected, atol=1e-14)


def test_ou_discrepancy_zero_time_is_zero():
    assert ac.ou_discrepancy(ChainParams(10_000, 5000), 2.0, 0.0).value == 0.0


def test_ou_discrepancy_example():
    rep = ac.ou_discrepancy(ChainParams(10_000, 5000), 2.0, 1.0, tolerance=0.02)
    assert rep.passed and rep.statistic == "tv" and rep.t == 10_000


def test_equilibrium_gap():
    small = ac.equilibrium_gaussian_gap(ChainParams(4, 2))
    assert small.value > 0.1
    rep = ac.equilibrium_gaussian_gap(ChainParams(10**6, 500_000), tolerance=0.005)
    assert rep.passed and rep.statistic == "kolmogorov"


def test_kolmogorov_to_cdf_point_mass():
    assert ac.kolmogorov_to_cdf(np.array([1.0]), np.array([0.0]), stats.norm.cdf) == pytest.approx(0.5)


def test_queue_rate_gap_examples():
    up, down = ac.queue_rate_gap(ChainParams(10**6, 1000), 3, 1.0)
    assert up == pytest.approx(0.005991, abs=1e-6)
    assert down == pytest.approx(0.001997, abs=1e-6)
    assert ac.queue_rate_gap(ChainParams(10**6, 1000), 0, 1.0)[1] is None
    with pytest.raises(DomainError):
        ac.queue_rate_gap(ChainParams(100, 10), 3, 0.0)


def test_mminf_discrepancy():
    rep = ac.mminf_discrepancy(ChainParams(10**6, 1000), None, 0.0, 50.0, tolerance=0.03)
    assert rep.passed and rep.t == pytest.approx(10**6 * 0.5 * math.log(50))
    with pytest.raises(DomainError):
        ac.mminf_discrepancy(ChainParams(10**4, 100), None, -5.0, 50.0)
    with pytest.raises(DomainError):
        ac.mminf_discrepancy(ChainParams(10**4, 100), 101, 0.0, 50.0)


def test_concentration_reports():
    plus = ac.concentration_report(ChainParams(10_000, 5000), 100.0, 0.5, "plus", tolerance=0.05)
    assert plus.passed and plus.reference == pytest.approx(101 / 2500)
    minus = ac.concentration_report(ChainParams(10**6, 100), 20.0, 0.5, "minus", tolerance=0.1)
    assert minus.passed
    wide = ac.concentration_report(ChainParams(10**6, 100), 20.0, 1e6, "minus")
    assert wide.value == 0.0
    with pytest.raises(DomainError):
        ac.concentration_report(ChainParams(100, 50), 2.0, 0.0, "minus")


def test_concentration_monte_carlo_agrees_with_exact(monkeypatch):
    p = ChainParams(10**6, 100)
    exact = ac.concentration_report(p, 5.0, 0.5, "minus").value
    monkeypatch.setattr(ac, "EXACT_STATE_LIMIT", 10)
    mc = ac.concentration_report(p, 5.0, 0.5, "minus", samples=20_000, rng=RngStream(5)).value
    assert abs(mc - exact) <= 3 * math.sqrt(exact * (1 - exact) / 20_000) + 1e-3
    with pytest.raises(DomainError):
        ac.concentration_report(p, 5.0, 0.5, "minus")


def test_window_mean_shift():
    p = ChainParams(10**6, 100)
    assert ac.window_mean_shift(p, "minus", 20.0) == pytest.approx(20 * (1 - p.kappa), rel=1e-9)
    q = ChainParams(10_000, 5000)
    assert ac.window_mean_shift(q, "plus", 10.0) == pytest.approx(10 * 0.5 * 100 * 0.5, rel=1e-9)


def test_report_passed_flag():
    assert ac.DiscrepancyReport("x", 1, 1, "tv", 0.1, 0.1).passed
    assert not ac.DiscrepancyReport("x", 1, 1, "tv", 0.1, 0.0999).passed
