"""Verification suites.

Each suite is a list of independent tasks; a task maps the config to report
rows and draws its randomness from a seed derived from (cfg.seed, task label),
so tasks can run in any order, on any number of workers, with identical rows.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import asymptotic_checks as ac
from .chain_model import (
    ChainParams,
    Pmf,
    birth_rate,
    death_rate,
    drift_identity_rhs,
    mean_at,
    stationary_pmf,
    total_rate,
    total_rate_identity_rhs,
    variance_at,
)
from .config import ExperimentConfig, load_goldens
from .errors import NumericIntegrityError
from .exact_engine import EvolveOptions, UniformizedChain, evolve, profile_curve, tv_distance
from .limit_laws import RegimeSpec, consistency_gap, gumbel_cdf, limit_profile
from .report import Row
from .rng import RngStream, derive_seed
from .stochastic_sim import (
    coupled_path,
    empirical_pmf,
    exp_sum_samples,
    hitting_times_zero,
    mean_hitting_time_zero,
    run_coupled_batch,
    simulate_final_states,
)

Task = Callable[[ExperimentConfig], list]


@dataclass(frozen=True)
class SuiteTask:
    suite: str
    name: str
    run: Task


def canonical_k(kind: str, n: int, alpha: float | None = None) -> int:
    if kind == "large":
        return n // 2
    if kind == "critical":
        return math.ceil(math.sqrt(alpha * n))
    return math.ceil(n ** 0.3)


def trend_violations(values) -> int:
    """Number of consecutive steps that fail to strictly decrease."""
    return int(sum(b >= a for a, b in zip(values, values[1:])))


def _trend_row(cfg, suite, label, values) -> Row:
    return Row.check(suite, f"{label}-trend", trend_violations(values), 0.0, seed=cfg.seed)


def ks_to_cdf(samples: np.ndarray, cdf) -> float:
    """Kolmogorov distance between the empirical law of ``samples`` and a continuous CDF."""
    x = np.sort(samples)
    f = cdf(x)
    m = x.size
    upper = np.arange(1, m + 1) / m - f
    lower = f - np.arange(m) / m
    return float(max(upper.max(), lower.max()))


def _se_slack(cfg) -> float:
    return cfg.tol("se-multiplier")


# moments ---------------------------------------------------------------------

MOMENT_CASES = [(n, k) for n in (100, 1000) for k in (n // 2, math.ceil(math.sqrt(n)))]
IDENTITY_CASES = [(10, 5), (1000, 500), (10**6, 1000)]


def _moment_rows(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for n, k in MOMENT_CASES:
        p = ChainParams(n, k)
        chain = UniformizedChain(p)
        opts = EvolveOptions(truncation_eps=1e-14)
        for t in (n / 10, n, 5 * n):
            law = evolve(p, Pmf.point_mass(k), t, opts, chain=chain)
            m, v = mean_at(p, k, t), variance_at(p, k, t)
            rows.append(Row.check("moments", "mean-closed-form", abs(law.mean() - m) / abs(m),
                                  cfg.tol("mean-closed-form"), n=n, k=k, t=t, limit=m, seed=cfg.seed))
            rows.append(Row.check("moments", "variance-closed-form", abs(law.variance() - v) / abs(v),
                                  cfg.tol("variance-closed-form"), n=n, k=k, t=t, limit=v, seed=cfg.seed))
    return rows


def _identity_rows(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for n, k in IDENTITY_CASES:
        p = ChainParams(n, k)
        x = p.states
        drift = np.max(np.abs(birth_rate(p, x) - death_rate(p, x) - drift_identity_rhs(p, x)))
        total = np.max(np.abs(total_rate(p, x) - total_rate_identity_rhs(p, x)))
        rows.append(Row.check("moments", "drift-identity", drift, cfg.tol("rate-identity"), n=n, k=k, seed=cfg.seed))
        rows.append(Row.check("moments", "total-rate-identity", total, cfg.tol("rate-identity"), n=n, k=k,
                              seed=cfg.seed))
    return rows


# stationarity ----------------------------------------------------------------

def _stationarity_rows(cfg: ExperimentConfig) -> list[Row]:
    p = ChainParams(1000, 500)
    pi = stationary_pmf(p)
    w = pi.weights
    x = p.states
    flow = np.abs(w[:-1] * birth_rate(p, x[:-1]) - w[1:] * death_rate(p, x[1:]))
    moved = evolve(p, pi, float(p.n), EvolveOptions(truncation_eps=1e-14))
    return [
        Row.check("stationarity", "detailed-balance", flow.max(), cfg.tol("detailed-balance"),
                  n=p.n, k=p.k, seed=cfg.seed),
        Row.check("stationarity", "stationary-fixed-point", tv_distance(moved, pi),
                  cfg.tol("stationary-fixed-point"), n=p.n, k=p.k, t=float(p.n), seed=cfg.seed),
    ]


# profile ---------------------------------------------------------------------

def profile_rows(cfg: ExperimentConfig, regime: RegimeSpec) -> list[Row]:
    """Exact-vs-limit rows along the n ladder, plus per-n maxima and a trend row.

    Grid-point rows at the last n carry the regime tolerance on their gap.
    """
    ladder = cfg.ladder(regime.kind)
    label = f"profile-{regime.kind}"
    thetas = cfg.theta_grid.points()
    rows, maxima = [], []
    for i, n in enumerate(ladder):
        k = cfg.k if cfg.k is not None else canonical_k(regime.kind, n, regime.alpha)
        p = ChainParams(n, k)
        points, _warnings = profile_curve(p, regime, thetas)
        final = i == len(ladder) - 1
        tol = cfg.tol(label) if final else None
        for pt in points:
            rows.append(Row.check("profile", label, pt.tv_exact, tol, n=n, k=k, theta=pt.theta, t=pt.t,
                                  limit=pt.tv_limit, gap=pt.gap, seed=cfg.seed))
        if points:
            maxima.append(max(pt.gap for pt in points))
            if len(ladder) > 1:
                rows.append(Row.check("profile", f"{label}-max-gap", maxima[-1], n=n, k=k, seed=cfg.seed))
    if len(ladder) > 1:
        rows.append(_trend_row(cfg, "profile", f"{label}-max-gap", maxima))
    return rows


def _reparameterization_rows(cfg: ExperimentConfig) -> list[Row]:
    """quarter-log-n profile at theta equals the half-log-k profile at theta - (1/4) log alpha."""
    rows = []
    for alpha in (0.25, 1.0, 4.0):
        form1 = RegimeSpec("critical", alpha, "quarter-log-n")
        form2 = RegimeSpec("critical", alpha, "half-log-k")
        worst = max(abs(limit_profile(form1, th) - limit_profile(form2, th - 0.25 * math.log(alpha)))
                    for th in cfg.theta_grid.points())
        rows.append(Row.check("profile", "reparameterization", worst, cfg.tol("reparameterization"),
                              limit=alpha, seed=cfg.seed))
    return rows


def _profile_regimes(cfg: ExperimentConfig) -> list[RegimeSpec]:
    if not cfg.all_regimes:
        return [cfg.regime]
    return [RegimeSpec("large"), RegimeSpec("critical", 1.0, "half-log-k"), RegimeSpec("small")]


# couplings -------------------------------------------------------------------

ORDER_CASES = [(100, 50), (10**4, 100)]


def _ordered_starts(p: ChainParams, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``count`` pairs x0 < y0 drawn uniformly from the strictly ordered pairs of [0, k]."""
    rng = RngStream(seed)
    u = rng.uniforms(0, 2 * count).reshape(2, count)
    a = np.floor(u[0] * (p.k + 1)).astype(np.int64)
    b = np.floor(u[1] * p.k).astype(np.int64)
    b = np.where(b >= a, b + 1, b)
    return np.minimum(a, b), np.maximum(a, b)


def _order_rows(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for n, k in ORDER_CASES:
        p = ChainParams(n, k)
        seed = derive_seed(cfg.seed, f"order:{n}:{k}")
        x0, y0 = _ordered_starts(p, cfg.samples, derive_seed(seed, "starts"))
        batch = run_coupled_batch(p, x0, y0, float(n), seed, np.arange(cfg.samples, dtype=np.uint64))
        rows.append(Row.check("couplings", "order-violations", int(batch.order_violated.sum()), 0.0,
                              n=n, k=k, t=float(n), seed=cfg.seed))
    return rows


def coalescence_starts(p: ChainParams, delta: float) -> tuple[int, int]:
    """Widest admissible start pair for the coalescence bound.

    Both starts lie within delta^{-1/4} sqrt(n) kappa of the centre and differ
    by at most delta sqrt(n) kappa (1 - kappa); the pair sits at the top of
    that band with the largest integer gap allowed.
    """
    top = math.floor(p.center + delta ** -0.25 * math.sqrt(p.n) * p.kappa)
    top = min(top, p.k)
    gap = math.floor(delta * p.fluctuation_scale)
    return top, top - gap


def coalescence_row(cfg: ExperimentConfig, p: ChainParams, delta: float, x0: int, y0: int,
                    label: str) -> Row:
    horizon = 4 * math.sqrt(delta) * p.n
    seed = derive_seed(cfg.seed, f"{label}:{p.n}:{x0}:{y0}")
    batch = run_coupled_batch(p, x0, y0, horizon, seed, np.arange(cfg.samples, dtype=np.uint64))
    met = ~np.isnan(batch.coalescence_time)
    frac = float(met.mean())
    se = math.sqrt(frac * (1 - frac) / cfg.samples)
    # missed fraction against the bound 2 delta^{1/4} with statistical slack
    tol = 2 * delta ** 0.25 + _se_slack(cfg) * se
    return Row.check("couplings", label, 1 - frac, tol, n=p.n, k=p.k, t=horizon, limit=2 * delta ** 0.25,
                     seed=cfg.seed)


def _coalescence_rows(cfg: ExperimentConfig) -> list[Row]:
    p, delta = ChainParams(10**4, 5000), 0.01
    x0, y0 = coalescence_starts(p, delta)
    return [coalescence_row(cfg, p, delta, x0, y0, "coalescence")]


def _coalescence_stress_rows(cfg: ExperimentConfig) -> list[Row]:
    # the admissible gap rounds down to 0 at this n; a unit gap is strictly harder
    p, delta = ChainParams(10**4, 5000), 0.01
    x0, _ = coalescence_starts(p, delta)
    return [coalescence_row(cfg, p, delta, x0, x0 - 1, "coalescence-unit-gap")]


def _sticky_rows(cfg: ExperimentConfig) -> list[Row]:
    """Recorded coupled paths never separate after their first meeting."""
    p = ChainParams(100, 50)
    seed = derive_seed(cfg.seed, "sticky")
    bad = 0
    for i in range(50):
        _, xs, ys = coupled_path(p, 0, p.k, 200.0, RngStream(seed, i))
        eq = np.flatnonzero(xs == ys)
        if eq.size:
            bad += int(np.sum(xs[eq[0]:] != ys[eq[0]:]))
    return [Row.check("couplings", "coalesced-stay-equal", bad, 0.0, n=p.n, k=p.k, t=200.0, seed=cfg.seed)]


def _path_moment_rows(cfg: ExperimentConfig) -> list[Row]:
    p, x0, t = ChainParams(100, 50), 50, 50.0
    seed = derive_seed(cfg.seed, "path-moments")
    x = simulate_final_states(p, x0, t, seed, np.arange(cfg.samples, dtype=np.uint64)).astype(float)
    m, v = mean_at(p, x0, t), variance_at(p, x0, t)
    sd = x.std(ddof=1)
    se_mean = sd / math.sqrt(x.size)
    centred = x - x.mean()
    se_var = math.sqrt(max(np.mean(centred**4) - sd**4, 0.0) / x.size)
    law = empirical_pmf(p, x0, t, cfg.samples, RngStream(derive_seed(cfg.seed, "empirical-pmf")))
    exact = evolve(p, Pmf.point_mass(x0), t)
    k = _se_slack(cfg)
    return [
        Row.check("couplings", "path-mean", abs(x.mean() - m), k * se_mean, n=p.n, k=p.k, t=t, limit=m,
                  seed=cfg.seed),
        Row.check("couplings", "path-variance", abs(x.var(ddof=1) - v), k * se_var, n=p.n, k=p.k, t=t, limit=v,
                  seed=cfg.seed),
        Row.check("couplings", "empirical-pmf", tv_distance(law, exact), cfg.tol("empirical-pmf"),
                  n=p.n, k=p.k, t=t, seed=cfg.seed),
    ]


# asymptotics -----------------------------------------------------------------

def _consistency_rows(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for theta in (-1.0, 0.0, 1.0):
        rows.append(Row.check("asymptotics", "consistency-gaussian", consistency_gap(100.0, theta)[0],
                              cfg.tol("consistency-gaussian"), theta=theta, limit=100.0, seed=cfg.seed))
        rows.append(Row.check("asymptotics", "consistency-gumbel", consistency_gap(0.001, theta)[1],
                              cfg.tol("consistency-gumbel"), theta=theta, limit=0.001, seed=cfg.seed))
    return rows


def _report_row(cfg, rep: ac.DiscrepancyReport, tolerance, **extra) -> Row:
    theta = None if math.isnan(rep.theta) else rep.theta
    t = None if math.isnan(rep.t) else rep.t
    limit = None if math.isnan(rep.reference) else rep.reference
    return Row.check("asymptotics", extra.pop("label", rep.label), rep.value, tolerance, n=rep.n, k=rep.k,
                     theta=theta, t=t, limit=limit, seed=cfg.seed, **extra)


def _ou_rows(cfg: ExperimentConfig) -> list[Row]:
    reps = [ac.ou_discrepancy(ChainParams(n, n // 2), 2.0, 1.0) for n in (10**3, 10**4, 10**5)]
    rows = [_report_row(cfg, r, cfg.tol("ou-marginal")) for r in reps]
    rows.append(_trend_row(cfg, "asymptotics", "ou-marginal", [r.value for r in reps]))
    return rows


def _equilibrium_rows(cfg: ExperimentConfig) -> list[Row]:
    ladder = (10**4, 10**5, 10**6)
    reps = [ac.equilibrium_gaussian_gap(ChainParams(n, n // 2)) for n in ladder]
    envelope = load_goldens()["equilibrium_gaussian_envelope"]["value"]
    rows = []
    for i, r in enumerate(reps):
        tol = cfg.tol("equilibrium-gaussian") if i == len(reps) - 1 else None
        rows.append(_report_row(cfg, r, tol))
        rows.append(Row.check("asymptotics", "equilibrium-gaussian-envelope", r.value * math.sqrt(r.n),
                              envelope, n=r.n, k=r.k, seed=cfg.seed))
    rows.append(_trend_row(cfg, "asymptotics", "equilibrium-gaussian", [r.value for r in reps]))
    return rows


def _queue_rate_rows(cfg: ExperimentConfig) -> list[Row]:
    ups, downs, rows = [], [], []
    for n in (10**4, 10**6, 10**8):
        p = ChainParams(n, math.ceil(math.sqrt(n)))
        up, down = ac.queue_rate_gap(p, 3, p.center)
        ups.append(up)
        downs.append(down)
        rows.append(Row.check("asymptotics", "queue-rate-up", up, n=n, k=p.k, seed=cfg.seed))
        rows.append(Row.check("asymptotics", "queue-rate-down", down, n=n, k=p.k, seed=cfg.seed))
    rows.append(_trend_row(cfg, "asymptotics", "queue-rate-up", ups))
    rows.append(_trend_row(cfg, "asymptotics", "queue-rate-down", downs))
    return rows


def _mminf_rows(cfg: ExperimentConfig) -> list[Row]:
    ladder = (10**4, 10**5, 10**6)
    reps = [ac.mminf_discrepancy(ChainParams(n, math.ceil(math.sqrt(n))), None, 0.0, 50.0) for n in ladder]
    rows = [_report_row(cfg, r, cfg.tol("mminf-law") if i == len(reps) - 1 else None)
            for i, r in enumerate(reps)]
    rows.append(_trend_row(cfg, "asymptotics", "mminf-law", [r.value for r in reps]))
    return rows


CONCENTRATION_CASES = [(10**4, 5000, "plus", 100.0, 0.5), (10**6, 100, "minus", 20.0, 0.5)]


def _concentration_rows(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for n, k, kind, C, eps in CONCENTRATION_CASES:
        rng = RngStream(derive_seed(cfg.seed, f"concentration:{kind}"))
        rep = ac.concentration_report(ChainParams(n, k), C, eps, kind, cfg.samples, rng)
        rows.append(_report_row(cfg, rep, cfg.tol(rep.label)))
    return rows


def _hitting_mean_rows(cfg: ExperimentConfig) -> list[Row]:
    p, x0 = ChainParams(20, 2), 2
    seed = derive_seed(cfg.seed, "hitting-mean")
    tau = hitting_times_zero(p, x0, seed, np.arange(cfg.samples, dtype=np.uint64))
    h = mean_hitting_time_zero(p, x0)
    se = tau.std(ddof=1) / math.sqrt(tau.size)
    return [Row.check("asymptotics", "hitting-mean", abs(tau.mean() - h), _se_slack(cfg) * se,
                      n=p.n, k=p.k, limit=h, seed=cfg.seed)]


def _exp_sum_rows(cfg: ExperimentConfig) -> list[Row]:
    count = 10 * cfg.samples
    streams = np.arange(count, dtype=np.uint64)
    s = exp_sum_samples(100, 0, derive_seed(cfg.seed, "expsum-mean"), streams)
    harmonic = float(np.sum(1.0 / np.arange(1, 101)))
    se = s.std(ddof=1) / math.sqrt(count)
    m = 10**4
    g = exp_sum_samples(m, 0, derive_seed(cfg.seed, "expsum-gumbel"), streams) - math.log(m)
    return [
        Row.check("asymptotics", "expsum-mean", abs(s.mean() - harmonic), _se_slack(cfg) * se, limit=harmonic,
                  seed=cfg.seed),
        Row.check("asymptotics", "expsum-gumbel", ks_to_cdf(g, gumbel_cdf), cfg.tol("expsum-gumbel"),
                  seed=cfg.seed),
    ]


def _hitting_gumbel_rows(cfg: ExperimentConfig) -> list[Row]:
    p = ChainParams(10**6, 63)
    tau = hitting_times_zero(p, p.k, derive_seed(cfg.seed, "hitting-gumbel"),
                             np.arange(cfg.samples, dtype=np.uint64))
    scaled = 2 * tau / p.n - math.log(p.k)
    return [Row.check("asymptotics", "hitting-gumbel", ks_to_cdf(scaled, gumbel_cdf), cfg.tol("hitting-gumbel"),
                      n=p.n, k=p.k, seed=cfg.seed)]


def binned_tv(a: np.ndarray, b: np.ndarray, edges: np.ndarray) -> float:
    """TV between two samples after binning on ``edges`` (outer bins catch the tails)."""
    full = np.concatenate(([-np.inf], edges, [np.inf]))
    ha = np.histogram(a, full)[0] / a.size
    hb = np.histogram(b, full)[0] / b.size
    return float(0.5 * np.abs(ha - hb).sum())


def _hitting_surrogate_rows(cfg: ExperimentConfig) -> list[Row]:
    p, x0 = ChainParams(10**4, 10), 10
    streams = np.arange(cfg.samples, dtype=np.uint64)
    tau = hitting_times_zero(p, x0, derive_seed(cfg.seed, "hitting-surrogate:chain"), streams)
    sur = 0.5 * p.n * exp_sum_samples(x0, 0, derive_seed(cfg.seed, "hitting-surrogate:sum"), streams)
    # both in units of n/2, on a fixed grid of 40 bins
    edges = np.linspace(0.0, 10.0, 41)
    value = binned_tv(2 * tau / p.n, 2 * sur / p.n, edges)
    return [Row.check("asymptotics", "hitting-vs-surrogate", value, cfg.tol("hitting-vs-surrogate"),
                      n=p.n, k=p.k, seed=cfg.seed)]


# orchestration ---------------------------------------------------------------

def suite_tasks(cfg: ExperimentConfig) -> list[SuiteTask]:
    tasks: list[SuiteTask] = []
    if "moments" in cfg.suites:
        tasks += [SuiteTask("moments", "moments", _moment_rows), SuiteTask("moments", "identities", _identity_rows)]
    if "stationarity" in cfg.suites:
        tasks.append(SuiteTask("stationarity", "stationarity", _stationarity_rows))
    if "couplings" in cfg.suites:
        tasks += [
            SuiteTask("couplings", "order", _order_rows),
            SuiteTask("couplings", "coalescence", _coalescence_rows),
            SuiteTask("couplings", "coalescence-unit-gap", _coalescence_stress_rows),
            SuiteTask("couplings", "sticky", _sticky_rows),
            SuiteTask("couplings", "path-moments", _path_moment_rows),
        ]
    if "asymptotics" in cfg.suites:
        tasks += [
            SuiteTask("asymptotics", "consistency", _consistency_rows),
            SuiteTask("asymptotics", "ou", _ou_rows),
            SuiteTask("asymptotics", "equilibrium", _equilibrium_rows),
            SuiteTask("asymptotics", "queue-rates", _queue_rate_rows),
            SuiteTask("asymptotics", "mminf", _mminf_rows),
            SuiteTask("asymptotics", "concentration", _concentration_rows),
            SuiteTask("asymptotics", "hitting-mean", _hitting_mean_rows),
            SuiteTask("asymptotics", "exp-sums", _exp_sum_rows),
            SuiteTask("asymptotics", "hitting-gumbel", _hitting_gumbel_rows),
            SuiteTask("asymptotics", "hitting-surrogate", _hitting_surrogate_rows),
        ]
    if "profile" in cfg.suites:
        for regime in _profile_regimes(cfg):
            tasks.append(SuiteTask("profile", f"profile-{regime.kind}",
                                   lambda c, r=regime: profile_rows(c, r)))
        if cfg.all_regimes:
            tasks.append(SuiteTask("profile", "reparameterization", _reparameterization_rows))
    return tasks


def _check_finite(rows: list[Row]) -> None:
    for row in rows:
        for name in ("theta", "t", "value", "limit", "gap", "tolerance"):
            v = getattr(row, name)
            if v is not None and not math.isfinite(v):
                raise NumericIntegrityError(f"{row.suite}/{row.label} at n={row.n}: {name} = {v}")


def run_tasks(cfg: ExperimentConfig, tasks: list[SuiteTask]) -> list[Row]:
    """Run tasks on ``cfg.workers`` threads and return rows in canonical order."""
    if cfg.workers == 1:
        chunks = [t.run(cfg) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(lambda t: t.run(cfg), tasks))
    rows = [row for chunk in chunks for row in chunk]
    _check_finite(rows)
    return sorted(rows, key=Row.sort_key)


def run_profile_suite(cfg: ExperimentConfig) -> list[Row]:
    return run_tasks(cfg, [t for t in suite_tasks(cfg) if t.suite == "profile"])


def run_suites(cfg: ExperimentConfig) -> list[Row]:
    return run_tasks(cfg, suite_tasks(cfg))


def exit_status(rows: list[Row]) -> int:
    """0 when every row passed, else 1."""
    return 0 if all(r.passed for r in rows) else 1


def run_verify_all(cfg: ExperimentConfig) -> tuple[int, list[Row]]:
    rows = run_suites(cfg)
    return exit_status(rows), rows

