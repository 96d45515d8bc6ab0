import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from bernoulli_laplace.chain_model import ChainParams, Pmf, birth_rate, death_rate, mean_at, variance_at
from bernoulli_laplace.errors import DomainError
from bernoulli_laplace.exact_engine import evolve, tv_distance
from bernoulli_laplace.rng import RngStream
from bernoulli_laplace.stochastic_sim import (
    batch_streams,
    coupled_path,
    empirical_pmf,
    exp_sum_sample,
    exp_sum_samples,
    hitting_time_zero,
    hitting_times_zero,
    mean_hitting_time_zero,
    run_coupled,
    run_coupled_batch,
    sample_path,
    simulate_final_states,
)


def fraction_hitting_mean(n, k, x0):
    """First-step analysis in exact arithmetic: h(x) = 1/q(x) + sum of jump probabilities times h."""
    q = lambda x: (Fraction(2 * (k - x) ** 2, n * n), Fraction(2 * x * (n - 2 * k + x), n * n))
    # m(x) = E[time to go from x to x-1]; m(k) = 1/d(k), m(x) = (1 + b(x) m(x+1)) / d(x)
    m = {}
    for x in range(k, 0, -1):
        b, d = q(x)
        m[x] = (1 + b * m.get(x + 1, 0)) / d
    return sum(m[x] for x in range(1, x0 + 1))


@given(st.integers(2, 60).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n // 2))),
       st.integers(0, 2**32), st.floats(0.0, 200.0))
def test_paths_are_birth_death(nk, seed, horizon):
    p = ChainParams(*nk)
    x0 = seed % (p.k + 1)
    path = sample_path(p, x0, horizon, RngStream(seed))
    states = np.concatenate(([x0], path.states))
    assert np.all(np.abs(np.diff(states)) == 1)
    assert np.all(np.diff(path.times) > 0) and np.all(path.times <= horizon)
    assert np.all((states >= 0) & (states <= p.k))


def test_zero_horizon():
    p = ChainParams(100, 50)
    path = sample_path(p, 17, 0.0, RngStream(1))
    assert path.times.size == 0 and path.final_state == 17
    with pytest.raises(DomainError):
        sample_path(p, 17, -1.0, RngStream(1))


def test_batch_matches_single_paths():
    p = ChainParams(100, 50)
    seed, streams = 99, np.arange(40, dtype=np.uint64)
    finals = simulate_final_states(p, 50, 30.0, seed, streams)
    singles = [sample_path(p, 50, 30.0, RngStream(seed, int(i))).final_state for i in streams]
    assert finals.tolist() == singles
    # re-sharding the batch changes nothing
    again = np.concatenate([simulate_final_states(p, 50, 30.0, seed, streams[i::3]) for i in range(3)])
    order = np.concatenate([streams[i::3] for i in range(3)])
    assert np.array_equal(again[np.argsort(order)], finals)


def test_path_moments_match_closed_forms():
    p, x0, t, m = ChainParams(100, 50), 50, 50.0, 100_000
    x = simulate_final_states(p, x0, t, 4242, np.arange(m, dtype=np.uint64)).astype(float)
    se = x.std(ddof=1) / math.sqrt(m)
    assert abs(x.mean() - mean_at(p, x0, t)) <= 3 * se
    se_var = math.sqrt((np.mean((x - x.mean()) ** 4) - x.var() ** 2) / m)
    assert abs(x.var(ddof=1) - variance_at(p, x0, t)) <= 3 * se_var


def test_empirical_pmf():
    p = ChainParams(100, 50)
    law = empirical_pmf(p, 50, 50.0, 100_000, RngStream(8))
    assert tv_distance(law, evolve(p, Pmf.point_mass(50), 50.0)) <= 0.02
    one = empirical_pmf(p, 50, 50.0, 1, RngStream(8))
    assert one.weights.max() == 1.0
    assert empirical_pmf(p, 33, 0.0, 500, RngStream(8)).dense(p)[33] == 1.0
    with pytest.raises(DomainError):
        empirical_pmf(p, 33, 1.0, 0, RngStream(8))


def test_coupling_identical_starts():
    p = ChainParams(100, 50)
    out = run_coupled(p, 20, 20, 50.0, RngStream(3))
    assert out.coalescence_time == 0.0 and out.final[0] == out.final[1]


def test_coupling_order_and_stickiness():
    p = ChainParams(100, 50)
    batch = run_coupled_batch(p, 0, 50, 500.0, 5, np.arange(5000, dtype=np.uint64))
    assert not batch.order_violated.any()
    assert np.all(batch.min_pair >= 0) and np.all(batch.max_pair <= 50)
    met = ~np.isnan(batch.coalescence_time)
    assert met.mean() > 0.9
    assert np.all(batch.final_x[met] == batch.final_y[met])
    for i in range(20):
        times, xs, ys = coupled_path(p, 0, 50, 500.0, RngStream(5, i))
        eq = np.flatnonzero(xs == ys)
        if eq.size:
            assert np.array_equal(xs[eq[0]:], ys[eq[0]:])
            assert times[eq[0]] == pytest.approx(batch.coalescence_time[i])
        assert (xs[-1] if xs.size else 0) == batch.final_x[i]


def test_each_coupled_marginal_is_the_chain():
    p, t, m = ChainParams(60, 30), 40.0, 40_000
    batch = run_coupled_batch(p, 0, 30, t, 21, np.arange(m, dtype=np.uint64))
    for x0, finals in ((0, batch.final_x), (30, batch.final_y)):
        exact = evolve(p, Pmf.point_mass(x0), t).dense(p)
        observed = np.bincount(finals, minlength=p.k + 1)
        keep = exact * m >= 5
        expected = exact[keep] * m
        obs = observed[keep]
        stat = ((obs - expected) ** 2 / expected).sum()
        assert stats.chi2.sf(stat, keep.sum() - 1) > 1e-4


def test_hitting_mean_oracles():
    assert mean_hitting_time_zero(ChainParams(20, 2), 2) == pytest.approx(17.647, abs=5e-4)
    for n, k in ((20, 2), (50, 7), (200, 30)):
        for x0 in (1, k):
            exact = fraction_hitting_mean(n, k, x0)
            assert mean_hitting_time_zero(ChainParams(n, k), x0) == pytest.approx(float(exact), rel=1e-10)


def test_hitting_times_simulated():
    p = ChainParams(20, 2)
    assert hitting_time_zero(p, 0, RngStream(1)) == 0.0
    tau = hitting_times_zero(p, 2, 77, np.arange(100_000, dtype=np.uint64))
    se = tau.std(ddof=1) / math.sqrt(tau.size)
    assert abs(tau.mean() - 17.647) <= 3 * se
    assert hitting_time_zero(p, 2, RngStream(77, 5)) == tau[5]


def test_exp_sum_single_term_and_errors():
    x = 8
    s = exp_sum_samples(x, x - 1, 3, np.arange(200_000, dtype=np.uint64))
    assert s.mean() == pytest.approx(1 / x, rel=0.01)
    with pytest.raises(DomainError):
        exp_sum_sample(3, 3, RngStream(1))
    with pytest.raises(DomainError):
        exp_sum_samples(3, 1, 1, np.arange(2, dtype=np.uint64), method="magic")


def test_exp_sum_mean_is_harmonic():
    s = exp_sum_samples(100, 0, 12, np.arange(1_000_000, dtype=np.uint64))
    se = s.std(ddof=1) / 1000
    assert abs(s.mean() - sum(1 / z for z in range(1, 101))) <= 3 * se


@pytest.mark.parametrize("x,y", [(30, 0), (40, 12)])
def test_exp_sum_methods_agree_in_law(x, y):
    streams = np.arange(50_000, dtype=np.uint64)
    direct = exp_sum_samples(x, y, 1, streams, "direct")
    order = exp_sum_samples(x, y, 2, streams, "order")
    assert stats.ks_2samp(direct, order).pvalue > 1e-3
    mean = sum(1 / z for z in range(y + 1, x + 1))
    assert order.mean() == pytest.approx(mean, rel=0.02)


def test_batch_streams_are_deterministic():
    rng = RngStream(4, 2)
    assert batch_streams(rng, 3)[0] == batch_streams(rng, 3)[0]
    assert batch_streams(rng, 3)[0] != batch_streams(RngStream(4, 3), 3)[0]


def test_start_state_validation():
    p = ChainParams(10, 5)
    with pytest.raises(DomainError):
        simulate_final_states(p, 6, 1.0, 0, np.arange(2, dtype=np.uint64))
    with pytest.raises(DomainError):
        run_coupled(p, 0, 6, 1.0, RngStream(0))
    assert birth_rate(p, 5) == 0 and death_rate(p, 0) == 0
