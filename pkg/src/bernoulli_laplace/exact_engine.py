"""Exact transient laws by uniformization of the tridiagonal generator.

With a dominating rate ``lam >= max_x q(x)`` the time-t law is

    mu P_t = sum_j Pois(lam t)(j) * mu K^j,      K = I + Q / lam,

where K is a stochastic tridiagonal kernel.  The Poisson series is cut on
both sides so that the discarded weight is at most ``truncation_eps``; since
K is stochastic that bounds the L1 error of the result.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .chain_model import ChainParams, Pmf, birth_rate, death_rate, stationary_pmf
from .errors import ContractError, DomainError, NumericIntegrityError
from .limit_laws import RegimeSpec, limit_profile

log = logging.getLogger(__name__)

# negative mass beyond this after an evolution step signals a numerical fault, not round-off
NEGATIVE_MASS_TOL = 1e-9


def _renormalise(v: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise NumericIntegrityError("non-finite probability mass after evolution")
    if v.min() < -NEGATIVE_MASS_TOL:
        raise NumericIntegrityError(f"negative probability mass {v.min():.3g} after evolution")
    np.clip(v, 0.0, None, out=v)
    total = v.sum()
    if not total > 0:
        raise NumericIntegrityError("evolved vector has no mass")
    v /= total
    return v


@dataclass(frozen=True)
class EvolveOptions:
    truncation_eps: float = 1e-12
    uniformization_rate: float | None = None  # None: exact maximum exit rate

    def __post_init__(self):
        if not 0 < self.truncation_eps <= 1e-6:
            raise ContractError(f"truncation_eps must lie in (0, 1e-6], got {self.truncation_eps}")


@dataclass(frozen=True)
class ProfilePoint:
    theta: float
    t: float
    tv_exact: float
    tv_limit: float
    gap: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "gap", abs(self.tv_exact - self.tv_limit))


class UniformizedChain:
    """Uniformized kernel for one ChainParams; reusable across many evolutions."""

    def __init__(self, p: ChainParams, rate: float | None = None):
        self.p = p
        states = p.states
        self.up = birth_rate(p, states)
        self.down = death_rate(p, states)
        exit_rate = self.up + self.down
        max_exit = float(exit_rate.max())
        if rate is None:
            rate = max_exit
        elif rate < max_exit * (1 - 1e-15):
            raise ContractError(f"uniformization rate {rate} below max exit rate {max_exit}")
        self.rate = float(rate)
        # row-vector kernel split into its three diagonals
        self.stay = 1.0 - exit_rate / self.rate
        np.clip(self.stay, 0.0, None, out=self.stay)
        self.up_p = self.up / self.rate
        self.down_p = self.down / self.rate

    def step(self, v: np.ndarray, out: np.ndarray) -> np.ndarray:
        np.multiply(v, self.stay, out=out)
        out[1:] += v[:-1] * self.up_p[:-1]
        out[:-1] += v[1:] * self.down_p[1:]
        return out

    def evolve_vector(self, v: np.ndarray, t: float, eps: float) -> tuple[np.ndarray, float]:
        """Returns (unnormalised result, retained Poisson weight)."""
        mean = self.rate * t
        if mean == 0.0:
            return v.copy(), 1.0
        left = int(stats.poisson.ppf(eps / 2, mean)) if mean > 50 else 0
        right = int(stats.poisson.isf(eps / 2, mean)) + 1
        # ppf can land one short of the requested tail; widen to be safe
        left = max(left - 1, 0)
        js = np.arange(left, right + 1)
        weights = stats.poisson.pmf(js, mean)
        cur = v.copy()
        buf = np.empty_like(cur)
        for _ in range(left):
            cur, buf = self.step(cur, buf), cur
        acc = weights[0] * cur
        for w in weights[1:]:
            cur, buf = self.step(cur, buf), cur
            acc += w * cur
        return acc, float(weights.sum())


def evolve(p: ChainParams, initial: Pmf, t: float, opts: EvolveOptions | None = None,
           *, chain: UniformizedChain | None = None) -> Pmf:
    """Law of X_t given X_0 ~ initial."""
    opts = opts or EvolveOptions()
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    if not isinstance(initial, Pmf):
        raise ContractError("initial law must be a Pmf")
    v = initial.dense(p)
    if t == 0:
        return Pmf.on_states(p, v)
    if chain is None:
        chain = UniformizedChain(p, opts.uniformization_rate)
    acc, _ = chain.evolve_vector(v, t, opts.truncation_eps)
    return Pmf.on_states(p, _renormalise(acc))


def tv_distance(a: Pmf, b: Pmf) -> float:
    """Half the L1 distance, after embedding both pmfs in a common integer range."""
    for m in (a, b):
        if not isinstance(m, Pmf):
            raise ContractError("tv_distance expects Pmf arguments")
    lo = min(a.support_offset, b.support_offset)
    hi = max(a.support_offset + a.weights.size, b.support_offset + b.weights.size)
    da = np.zeros(hi - lo)
    db = np.zeros(hi - lo)
    da[a.support_offset - lo:a.support_offset - lo + a.weights.size] = a.weights
    db[b.support_offset - lo:b.support_offset - lo + b.weights.size] = b.weights
    return float(min(1.0, 0.5 * np.abs(da - db).sum()))


def tv_to_equilibrium(p: ChainParams, x0: int, t: float, opts: EvolveOptions | None = None) -> float:
    if not 0 <= x0 <= p.k:
        raise DomainError(f"start state {x0} outside [0, {p.k}]")
    return tv_distance(evolve(p, Pmf.point_mass(x0), t, opts), stationary_pmf(p))


def tv_curve(p: ChainParams, x0: int, times: Sequence[float],
             opts: EvolveOptions | None = None) -> np.ndarray:
    """TV to equilibrium from x0 at each time, evolving incrementally between sorted times."""
    opts = opts or EvolveOptions()
    if not 0 <= x0 <= p.k:
        raise DomainError(f"start state {x0} outside [0, {p.k}]")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise DomainError("times must be non-negative")
    chain = UniformizedChain(p, opts.uniformization_rate)
    pi = stationary_pmf(p).weights
    out = np.empty(times.size)
    v = np.zeros(p.k + 1)
    v[x0] = 1.0
    now = 0.0
    for i in np.argsort(times, kind="stable"):
        dt = times[i] - now
        if dt > 0:
            v, _ = chain.evolve_vector(v, dt, opts.truncation_eps)
            v = _renormalise(v)
            now = times[i]
        out[i] = min(1.0, 0.5 * np.abs(v - pi).sum())
    return out


def worst_case_tv(p: ChainParams, t: float, opts: EvolveOptions | None = None) -> tuple[float, int]:
    """max over start states of the TV to equilibrium; returns (value, argmax)."""
    values = [tv_to_equilibrium(p, x0, t, opts) for x0 in range(p.k + 1)]
    best = int(np.argmax(values))
    return values[best], best


def regime_time(p: ChainParams, r: RegimeSpec, theta: float) -> float:
    if r.time_form == "quarter-log-n":
        return 0.25 * p.n * math.log(p.n) + theta * p.n
    return 0.5 * p.n * math.log(p.k) + theta * p.n


def regime_matches(p: ChainParams, r: RegimeSpec) -> bool:
    """Advisory check of (n, k) against the regime's canonical choice of k."""
    if r.kind == "large":
        return p.k == p.n // 2
    if r.kind == "critical":
        return p.k == math.ceil(math.sqrt(r.alpha * p.n))
    return p.k == math.ceil(p.n ** 0.3)


def profile_curve(p: ChainParams, r: RegimeSpec, thetas: Iterable[float],
                  opts: EvolveOptions | None = None) -> tuple[list[ProfilePoint], list[str]]:
    """Exact TV from the start state k against the regime's limit profile.

    Returns the profile points and a list of warnings (regime mismatch,
    skipped grid points with negative time).
    """
    warnings: list[str] = []
    if not regime_matches(p, r):
        msg = f"(n={p.n}, k={p.k}) is not the canonical choice for regime {r.kind}"
        log.warning(msg)
        warnings.append(msg)
    kept_theta, kept_t = [], []
    for theta in thetas:
        t = regime_time(p, r, float(theta))
        if t < 0:
            msg = f"theta={theta} gives negative time {t:.6g} at n={p.n}; skipped"
            log.warning(msg)
            warnings.append(msg)
            continue
        kept_theta.append(float(theta))
        kept_t.append(t)
    tvs = tv_curve(p, p.k, kept_t, opts)
    points = [ProfilePoint(theta, t, float(tv), limit_profile(r, theta))
              for theta, t, tv in zip(kept_theta, kept_t, tvs)]
    return points, warnings


def apply_generator(p: ChainParams, f) -> np.ndarray:
    """(Qf)(x) = birth(x)(f(x+1) - f(x)) + death(x)(f(x-1) - f(x))."""
    f = np.asarray(f, dtype=float)
    if f.shape != (p.k + 1,):
        raise ContractError(f"f must have length {p.k + 1}, got shape {f.shape}")
    states = p.states
    up = birth_rate(p, states)
    down = death_rate(p, states)
    out = np.zeros(p.k + 1)
    out[:-1] += up[:-1] * (f[1:] - f[:-1])
    out[1:] += down[1:] * (f[:-1] - f[1:])
    return out
