"""Closed-form limit profiles and the discrete/continuous TV computations behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import special, stats

from .chain_model import Pmf
from .errors import DomainError

DEFAULT_TOL = 1e-10
# summation windows wider than this switch to the crossing-point formula
_MAX_SUM_TERMS = 2_000_000

RegimeKind = Literal["large", "critical", "small"]
TimeForm = Literal["quarter-log-n", "half-log-k"]


@dataclass(frozen=True)
class RegimeSpec:
    """Asymptotic regime of k/sqrt(n) and the time parameterization of its window.

    ``large`` is timed from (n/4) log n, ``small`` from (n/2) log k; ``critical``
    admits both and carries alpha = lim k^2/n.
    """

    kind: RegimeKind
    alpha: float | None = None
    time_form: TimeForm | None = None

    def __post_init__(self):
        if self.kind not in ("large", "critical", "small"):
            raise DomainError(f"unknown regime {self.kind!r}")
        if self.kind == "critical":
            if self.alpha is None or not self.alpha > 0:
                raise DomainError("critical regime needs alpha > 0")
            form = self.time_form or "half-log-k"
        else:
            if self.alpha is not None:
                raise DomainError(f"alpha is only meaningful for the critical regime, got {self.alpha}")
            form = "quarter-log-n" if self.kind == "large" else "half-log-k"
            if self.time_form not in (None, form):
                raise DomainError(f"regime {self.kind} is timed by {form}, not {self.time_form}")
        if form not in ("quarter-log-n", "half-log-k"):
            raise DomainError(f"unknown time form {form!r}")
        object.__setattr__(self, "time_form", form)


@dataclass(frozen=True)
class GaussianLaw:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std >= 0:
            raise DomainError(f"standard deviation must be non-negative, got {self.std}")

    @property
    def variance(self) -> float:
        return self.std * self.std

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.std == 0:
            return (x >= self.mean).astype(float)
        return normal_cdf((x - self.mean) / self.std)


def normal_cdf(x):
    """Standard normal CDF via erfc, accurate in both tails."""
    out = 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def gaussian_shift_tv(m: float) -> float:
    """TV between N(m, 1) and N(0, 1), i.e. 2 Phi(|m|/2) - 1.

    Evaluated as erf(|m| / (2 sqrt 2)) so that tiny shifts keep full relative precision.
    """
    return float(special.erf(abs(m) / (2.0 * math.sqrt(2.0))))


def gumbel_cdf(x):
    out = np.exp(-np.exp(-np.asarray(x, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


def gumbel_tail(x):
    """P(G > x) = 1 - exp(-exp(-x)) for a standard Gumbel G."""
    out = -np.expm1(-np.exp(-np.asarray(x, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


def _check_tol(tol: float):
    if not 0 < tol <= 1e-6:
        raise DomainError(f"tol must lie in (0, 1e-6], got {tol}")


def poisson_logpmf(lam: float, js: np.ndarray) -> np.ndarray:
    js = np.asarray(js, dtype=float)
    if lam == 0:
        return np.where(js == 0, 0.0, -np.inf)
    return js * math.log(lam) - lam - special.gammaln(js + 1)


def poisson_pmf(lam: float, js) -> np.ndarray:
    return np.exp(poisson_logpmf(lam, js))


def poisson_window(lam: float, tail: float) -> tuple[int, int]:
    """Integer interval outside which Pois(lam) has mass at most ``tail`` on each side."""
    if lam == 0:
        return 0, 0
    lo = int(stats.poisson.ppf(tail, lam))
    hi = int(stats.poisson.isf(tail, lam)) + 1
    return max(lo - 1, 0), hi


def poisson_tv_crossing(lam1: float, lam2: float) -> float:
    """TV between two Poisson laws from the point where their pmfs cross.

    For lam1 > lam2 the first pmf dominates exactly on j >= (lam1-lam2)/log(lam1/lam2).
    """
    if lam1 < 0 or lam2 < 0:
        raise DomainError("Poisson rates must be non-negative")
    if lam1 == lam2:
        return 0.0
    hi, lo = max(lam1, lam2), min(lam1, lam2)
    if lo == 0:
        return float(-math.expm1(-hi))
    # log difference, not log of the ratio, which overflows for subnormal lo
    cross = (hi - lo) / (math.log(hi) - math.log(lo))
    j0 = math.ceil(cross)
    return float(stats.poisson.sf(j0 - 1, hi) - stats.poisson.sf(j0 - 1, lo))


def poisson_tv(lam1: float, lam2: float, tol: float = DEFAULT_TOL) -> float:
    """1/2 sum_j |Pois(lam1)(j) - Pois(lam2)(j)|, truncated so the discarded tails total <= tol."""
    if lam1 < 0 or lam2 < 0:
        raise DomainError(f"Poisson rates must be non-negative, got {lam1}, {lam2}")
    _check_tol(tol)
    if lam1 == lam2:
        return 0.0
    (a_lo, a_hi), (b_lo, b_hi) = poisson_window(lam1, tol / 4), poisson_window(lam2, tol / 4)
    if a_lo > b_lo:
        (a_lo, a_hi), (b_lo, b_hi) = (b_lo, b_hi), (a_lo, a_hi)
    if b_lo <= a_hi + 1:
        ranges = [(a_lo, max(a_hi, b_hi))]
    else:
        ranges = [(a_lo, a_hi), (b_lo, b_hi)]
    if sum(hi - lo + 1 for lo, hi in ranges) > _MAX_SUM_TERMS:
        return poisson_tv_crossing(lam1, lam2)
    total = 0.0
    for lo, hi in ranges:
        js = np.arange(lo, hi + 1)
        total += np.abs(poisson_pmf(lam1, js) - poisson_pmf(lam2, js)).sum()
    return float(min(1.0, 0.5 * total))


def binpois_convolution(x0: int, psurv: float, lam: float, tol: float = DEFAULT_TOL) -> Pmf:
    """Law of Bin(x0, psurv) + Pois(lam), independent: the M/M/inf queue at a fixed time."""
    _check_tol(tol)
    if not 0 <= psurv <= 1:
        raise DomainError(f"survival probability must lie in [0, 1], got {psurv}")
    if lam < 0:
        raise DomainError(f"Poisson rate must be non-negative, got {lam}")
    if x0 < 0 or int(x0) != x0:
        raise DomainError(f"x0 must be a non-negative integer, got {x0}")
    binom = stats.binom.pmf(np.arange(int(x0) + 1), int(x0), psurv)
    _, hi = poisson_window(lam, tol / 2)
    pois = poisson_pmf(lam, np.arange(hi + 1))
    w = np.convolve(binom, pois)
    nz = np.flatnonzero(w)
    w = w[nz[0]:nz[-1] + 1]
    return Pmf(int(nz[0]), w / w.sum())


def limit_profile(r: RegimeSpec, theta: float, tol: float = DEFAULT_TOL) -> float:
    """Limiting TV distance at window coordinate theta for the regime's time form."""
    shrink = math.exp(-2.0 * theta)
    if r.kind == "large":
        return gaussian_shift_tv(shrink)
    if r.kind == "small":
        return gumbel_tail(2.0 * theta)
    alpha = r.alpha
    if r.time_form == "quarter-log-n":
        return poisson_tv(alpha + math.sqrt(alpha) * shrink, alpha, tol)
    return poisson_tv(alpha + shrink, alpha, tol)


def consistency_gap(alpha: float, theta: float, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Distance of the critical profile from the large- and small-regime profiles.

    Returns (gap_to_gaussian, gap_to_gumbel); both vanish as alpha -> inf and
    alpha -> 0 respectively.
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    shrink = math.exp(-2.0 * theta)
    to_gauss = abs(poisson_tv(alpha + math.sqrt(alpha) * shrink, alpha, tol) - gaussian_shift_tv(shrink))
    to_gumbel = abs(poisson_tv(alpha + shrink, alpha, tol) - gumbel_tail(2.0 * theta))
    return to_gauss, to_gumbel
