"""Finite-n discrepancies for each approximation used on the way to the limit profiles.

Every check returns a DiscrepancyReport; ``passed`` is ``value <= tolerance``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain_model import (
    ChainParams,
    Pmf,
    birth_rate,
    death_rate,
    mean_at,
    stationary_pmf,
    window_time,
)
from .errors import DomainError
from .exact_engine import EvolveOptions, evolve, tv_distance
from .limit_laws import GaussianLaw, binpois_convolution, normal_cdf
from .rng import RngStream
from .stochastic_sim import batch_streams, simulate_final_states

# above this many states the concentration check falls back to Monte Carlo
EXACT_STATE_LIMIT = 50_000


@dataclass(frozen=True)
class DiscrepancyReport:
    label: str
    n: int
    k: int
    statistic: str  # tv | kolmogorov | ratio-gap | probability
    value: float
    tolerance: float
    reference: float = math.nan  # a comparison value when one exists (limit, envelope)
    theta: float = math.nan
    t: float = math.nan
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.value <= self.tolerance))


def rescale_state(p: ChainParams, x):
    """(x - k^2/n) / (sqrt(n) kappa (1 - kappa))."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0) or np.any(xs > p.k):
        raise DomainError(f"state outside [0, {p.k}]")
    out = (xs - p.center) / p.fluctuation_scale
    return float(out) if out.ndim == 0 else out


def ou_marginal(z: float, s: float) -> GaussianLaw:
    """Law at time s of the OU process dD = -2D ds + 2 dB started at z."""
    if s < 0:
        raise DomainError(f"rescaled time must be non-negative, got {s}")
    return GaussianLaw(z * math.exp(-2.0 * s), math.sqrt(-math.expm1(-4.0 * s)))


def lattice_cell_masses(law: GaussianLaw, points: np.ndarray, width: float) -> np.ndarray:
    """Mass of ``law`` in the cells [y - width/2, y + width/2) around each lattice point."""
    if law.std == 0:
        masses = np.zeros(points.size)
        inside = np.flatnonzero((points - width / 2 <= law.mean) & (law.mean < points + width / 2))
        if inside.size:
            masses[inside[0]] = 1.0
        return masses
    edges = np.append(points - width / 2, points[-1] + width / 2)
    cdf = normal_cdf((edges - law.mean) / law.std)
    return np.diff(cdf)


def lattice_vs_gaussian_tv(weights: np.ndarray, law: GaussianLaw, points: np.ndarray, width: float) -> float:
    """TV between a lattice law and a Gaussian integrated over matching cells.

    Gaussian mass falling outside every cell counts fully towards the distance.
    """
    cells = lattice_cell_masses(law, points, width)
    outside = max(0.0, 1.0 - cells.sum())
    return float(0.5 * (np.abs(weights - cells).sum() + outside))


def ou_start_state(p: ChainParams, z: float) -> int:
    x0 = int(round(p.center + z * p.fluctuation_scale))
    if not 0 <= x0 <= p.k:
        raise DomainError(f"z={z} maps to state {x0} outside [0, {p.k}]")
    return x0


def ou_discrepancy(p: ChainParams, z: float, s: float, tolerance: float = math.inf,
                   opts: EvolveOptions | None = None) -> DiscrepancyReport:
    """Chain law at time n s from the state nearest to z (rescaled) against the OU marginal.

    The diffusion starts from the rescaled image of that lattice state rather
    than from z itself, so start-point rounding does not enter the distance.
    """
    x0 = ou_start_state(p, z)
    law = evolve(p, Pmf.point_mass(x0), p.n * s, opts)
    points = rescale_state(p, p.states)
    z_lattice = rescale_state(p, x0)
    value = lattice_vs_gaussian_tv(law.weights, ou_marginal(z_lattice, s), points, 1.0 / p.fluctuation_scale)
    return DiscrepancyReport("ou-marginal", p.n, p.k, "tv", value, tolerance, t=p.n * s)


def kolmogorov_to_cdf(weights: np.ndarray, points: np.ndarray, cdf) -> float:
    """sup |F - G| for a lattice law F on sorted ``points`` and a continuous CDF G."""
    upper = np.cumsum(weights)
    lower = upper - weights
    g = cdf(points)
    return float(max(np.max(np.abs(upper - g)), np.max(np.abs(lower - g))))


def equilibrium_gaussian_gap(p: ChainParams, tolerance: float = math.inf) -> DiscrepancyReport:
    """Kolmogorov distance between the rescaled stationary law and N(0, 1)."""
    pi = stationary_pmf(p)
    value = kolmogorov_to_cdf(pi.weights, rescale_state(p, p.states), normal_cdf)
    return DiscrepancyReport("equilibrium-gaussian", p.n, p.k, "kolmogorov", value, tolerance)


def queue_rate_gap(p: ChainParams, x: int, alpha: float) -> tuple[float, float | None]:
    """Relative error of n * rates against the M/M/inf rates 2 alpha (up) and 2x (down)."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    up = abs(p.n * float(birth_rate(p, x)) / (2 * alpha) - 1)
    if x == 0:
        return up, None
    down = abs(p.n * float(death_rate(p, x)) / (2 * x) - 1)
    return up, down


def mminf_discrepancy(p: ChainParams, x0: int | None, theta: float, C: float,
                      tolerance: float = math.inf, opts: EvolveOptions | None = None) -> DiscrepancyReport:
    """Chain law against the M/M/inf queue law after the post-burn-in stretch.

    After the burn-in T^-(C) the chain sits near C; the remaining time to
    (n/2) log k + theta n is s n with s = (1/2) log C + theta.  The chain is
    started from x0 (default: round(C)) and run for s n, then compared with
    Bin(x0, e^{-2s}) + Pois(alpha (1 - e^{-2s})), alpha = k^2/n.
    """
    if not C > 0:
        raise DomainError(f"C must be positive, got {C}")
    s = 0.5 * math.log(C) + theta
    if s < 0:
        raise DomainError(f"post-burn-in time s = {s} is negative")
    if x0 is None:
        x0 = int(round(C))
    if not 0 <= x0 <= p.k:
        raise DomainError(f"x0={x0} outside [0, {p.k}]")
    alpha = p.center
    t = p.n * s
    chain = evolve(p, Pmf.point_mass(x0), t, opts)
    psurv = math.exp(-2.0 * s)
    queue = binpois_convolution(x0, psurv, alpha * -math.expm1(-2.0 * s))
    value = tv_distance(chain, queue)
    return DiscrepancyReport("mminf-law", p.n, p.k, "tv", value, tolerance, theta=theta, t=t)


def concentration_band(p: ChainParams, kind: str, C: float, eps: float) -> tuple[float, float]:
    """(centre, half-width) of the concentration band at the window time."""
    if kind == "plus":
        return p.center + C * p.fluctuation_scale, eps * C * p.kappa * math.sqrt(p.n)
    if kind == "minus":
        return float(C), eps * C
    raise DomainError(f"unknown window kind {kind!r}")


def concentration_report(p: ChainParams, C: float, eps: float, kind: str, samples: int = 0,
                         rng: RngStream | None = None, tolerance: float = math.inf,
                         opts: EvolveOptions | None = None) -> DiscrepancyReport:
    """P_k(|X_T - centre| > eps * C * scale) at the window time T = T^{+/-}(C).

    Computed exactly when the state space is small enough, otherwise from
    ``samples`` trajectories.  ``reference`` holds the Chebyshev envelope
    (1 + C) / (eps^2 C^2).
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    t = window_time(p, kind, C).t
    centre, half = concentration_band(p, kind, C, eps)
    states = p.states
    outside = np.abs(states - centre) > half
    if p.k + 1 <= EXACT_STATE_LIMIT:
        weights = evolve(p, Pmf.point_mass(p.k), t, opts).weights
        value = float(weights[outside].sum())
    else:
        if rng is None or samples < 1:
            raise DomainError("Monte Carlo concentration needs samples >= 1 and an rng stream")
        seed, streams = batch_streams(rng, samples)
        finals = simulate_final_states(p, p.k, t, seed, streams)
        value = float(outside[finals].mean())
    envelope = (1 + C) / (eps**2 * C**2)
    return DiscrepancyReport(f"concentration-{kind}", p.n, p.k, "probability", value, tolerance,
                             reference=envelope, t=t)


def window_mean_shift(p: ChainParams, kind: str, C: float) -> float:
    """E_k[X_T] - k^2/n at the window time; C (1-kappa) sqrt(n) kappa for plus, C (1-kappa) for minus."""
    t = window_time(p, kind, C).t
    return mean_at(p, p.k, t) - p.center
