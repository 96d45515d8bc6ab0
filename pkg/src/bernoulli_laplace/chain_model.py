"""The Bernoulli-Laplace urn as a birth-death chain on {0, ..., k}.

The state is the number of red balls in the first urn.  Two balls are picked
uniformly at rate 1 and swapped when they sit in different urns, which gives
the rates

    birth(x) = 2 (k - x)^2 / n^2
    death(x) = 2 x (n - 2k + x) / n^2

All functions here are pure; arrays are accepted wherever a state is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import gammaln

from .errors import ContractError, DomainError

PMF_ATOL = 1e-12


@dataclass(frozen=True)
class ChainParams:
    """Urn instance: population ``n`` and red-ball count ``k``."""

    n: int
    k: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.k) != self.k:
            raise DomainError(f"n and k must be integers, got n={self.n}, k={self.k}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))
        if self.n < 2:
            raise DomainError(f"n must be >= 2, got {self.n}")
        if not 1 <= self.k <= self.n // 2:
            raise DomainError(f"k must satisfy 1 <= k <= n//2, got k={self.k}, n={self.n}")

    @property
    def kappa(self) -> float:
        return self.k / self.n

    @property
    def center(self) -> float:
        """Stationary mean k^2/n."""
        return self.k * self.k / self.n

    @property
    def states(self) -> np.ndarray:
        return np.arange(self.k + 1)

    @property
    def fluctuation_scale(self) -> float:
        """sqrt(n) kappa (1 - kappa), the stationary standard deviation to leading order."""
        return math.sqrt(self.n) * self.kappa * (1.0 - self.kappa)


@dataclass(frozen=True)
class Pmf:
    """Probability vector on the integers ``support_offset, support_offset + 1, ...``."""

    support_offset: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ContractError("pmf weights must be a non-empty 1-d array")
        if int(self.support_offset) != self.support_offset:
            raise ContractError(f"support offset must be integral, got {self.support_offset}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ContractError("pmf weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > PMF_ATOL:
            raise ContractError(f"pmf weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "support_offset", int(self.support_offset))

    @classmethod
    def point_mass(cls, x: int) -> "Pmf":
        return cls(int(x), np.ones(1))

    @classmethod
    def on_states(cls, p: ChainParams, weights) -> "Pmf":
        w = np.asarray(weights, dtype=float)
        if w.shape != (p.k + 1,):
            raise ContractError(f"expected {p.k + 1} weights, got shape {w.shape}")
        return cls(0, w)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.support_offset, self.support_offset + self.weights.size)

    def mean(self) -> float:
        return float(np.dot(self.support, self.weights))

    def variance(self) -> float:
        centred = self.support - self.mean()
        return float(np.dot(centred * centred, self.weights))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.weights)

    def dense(self, p: ChainParams) -> np.ndarray:
        """Weights laid out on {0, ..., k}; mass outside the state space is a contract error."""
        lo, hi = self.support_offset, self.support_offset + self.weights.size - 1
        if lo < 0 or hi > p.k:
            outside = self.weights[self.support < 0].sum() + self.weights[self.support > p.k].sum()
            if outside > 0:
                raise ContractError(f"pmf has mass {outside} outside [0, {p.k}]")
        out = np.zeros(p.k + 1)
        keep = (self.support >= 0) & (self.support <= p.k)
        out[self.support[keep]] = self.weights[keep]
        return out


def _check_state(p: ChainParams, x):
    arr = np.asarray(x)
    if np.any(arr < 0) or np.any(arr > p.k):
        raise DomainError(f"state outside [0, {p.k}]: {x}")
    return arr


def birth_rate(p: ChainParams, x):
    """Rate of x -> x+1.  Zero at x = k (no black ball left in urn 1)."""
    xs = _check_state(p, x).astype(float)
    return 2.0 * (p.k - xs) ** 2 / p.n**2


def death_rate(p: ChainParams, x):
    """Rate of x -> x-1.  Zero at x = 0."""
    xs = _check_state(p, x).astype(float)
    return 2.0 * xs * (p.n - 2 * p.k + xs) / p.n**2


def total_rate(p: ChainParams, x):
    return birth_rate(p, x) + death_rate(p, x)


def drift_identity_rhs(p: ChainParams, x):
    """-(2/n)(x - k^2/n): the birth-minus-death rate in the recentred variable."""
    xs = _check_state(p, x).astype(float)
    return -2.0 * (xs - p.center) / p.n


def total_rate_identity_rhs(p: ChainParams, x):
    """4 kappa^2 (1-kappa)^2 + 8 (1/2 - kappa)^2 xbar / n + 4 xbar^2 / n^2."""
    xs = _check_state(p, x).astype(float)
    kap = p.kappa
    xbar = xs - p.center
    return 4 * kap**2 * (1 - kap) ** 2 + 8 * (0.5 - kap) ** 2 * xbar / p.n + 4 * xbar**2 / p.n**2


def max_exit_rate(p: ChainParams) -> float:
    return float(np.max(total_rate(p, p.states)))


def stationary_pmf(p: ChainParams) -> Pmf:
    """Hypergeometric HG(n, k, k): red balls among k uniform draws from n."""
    r = p.states.astype(float)
    n, k = float(p.n), float(p.k)
    log_w = (
        gammaln(k + 1) - gammaln(r + 1) - gammaln(k - r + 1)
        + gammaln(n - k + 1) - gammaln(k - r + 1) - gammaln(n - 2 * k + r + 1)
    )
    w = np.exp(log_w - log_w.max())
    return Pmf(0, w / w.sum())


def stationary_variance(p: ChainParams) -> float:
    kap = p.kappa
    return kap**2 * (1 - kap) ** 2 * p.n / (1 - 1 / p.n)


def _check_time(t):
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")


def mean_at(p: ChainParams, x0, t: float) -> float:
    """E_x0[X_t] = k^2/n + (x0 - k^2/n) exp(-2t/n)."""
    _check_state(p, x0)
    _check_time(t)
    return p.center + (x0 - p.center) * math.exp(-2.0 * t / p.n)


def variance_at(p: ChainParams, x0, t: float) -> float:
    """Var_x0[X_t] from the closed form obtained by the integrating-factor method.

    Three terms: relaxation of the stationary variance, a cross term linear in
    the initial offset, and the decay of the squared initial offset.
    """
    _check_state(p, x0)
    _check_time(t)
    n = p.n
    kap = p.kappa
    xbar = x0 - p.center
    decay = xbar * math.exp(-2.0 * t / n)
    term1 = kap**2 * (1 - kap) ** 2 * n / (1 - 1 / n) * -math.expm1(-4.0 / n * (1 - 1 / n) * t)
    # n = 2 makes (1 - 2/n) vanish; the cross term then integrates to (8/n)(1/2-kappa)^2 xbar t e^{-2t/n}
    if n == 2:
        term2 = 8.0 / n * (0.5 - kap) ** 2 * decay * t
    else:
        term2 = 4 * (0.5 - kap) ** 2 * decay / (1 - 2 / n) * -math.expm1(-2.0 / n * (1 - 2 / n) * t)
    term3 = decay**2 * math.expm1(4.0 * t / n**2)
    return term1 + term2 + term3


@dataclass(frozen=True)
class WindowTime:
    kind: Literal["plus", "minus"]
    C: float
    t: float


def window_time(p: ChainParams, kind: str, C: float) -> WindowTime:
    """Burn-in time after which the chain started from k sits C fluctuation units off centre.

    minus: t = (n/2) log(k/C), admissible for 0 < C <= k.
    plus:  t = (n/4) log n - (n/2) log C, admissible for 0 < C <= sqrt(n).
    """
    if not C > 0:
        raise DomainError(f"window scale C must be positive, got {C}")
    if kind == "minus":
        if C > p.k:
            raise DomainError(f"minus window needs C <= k = {p.k}, got {C}")
        t = 0.5 * p.n * math.log(p.k / C)
    elif kind == "plus":
        if C > math.sqrt(p.n):
            raise DomainError(f"plus window needs C <= sqrt(n) = {math.sqrt(p.n)}, got {C}")
        t = 0.25 * p.n * math.log(p.n) - 0.5 * p.n * math.log(C)
    else:
        raise DomainError(f"unknown window kind {kind!r}")
    return WindowTime(kind, float(C), max(t, 0.0))
