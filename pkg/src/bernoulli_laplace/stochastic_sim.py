"""Exact-event simulation of the urn chain, the basic coupling, and hitting times.

Trajectories are simulated in lockstep across a batch: at each iteration
every live trajectory performs its next event.  Event ``j`` of a trajectory
consumes counters ``2j`` (holding time) and ``2j + 1`` (move choice) of its
own stream, so results do not depend on how trajectories are batched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .chain_model import ChainParams, Pmf, birth_rate, death_rate
from .errors import DomainError
from .rng import RngStream, derive_seed, stream_keys, uniforms


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    x0: int
    horizon: float

    @property
    def final_state(self) -> int:
        return int(self.states[-1]) if self.states.size else self.x0


@dataclass(frozen=True)
class CouplingOutcome:
    coalescence_time: float | None
    order_violated: bool
    min_pair: int
    max_pair: int
    final: tuple[int, int]


@dataclass(frozen=True)
class CouplingBatch:
    """Per-pair arrays; coalescence_time is NaN where the pair had not met by the horizon."""

    coalescence_time: np.ndarray
    order_violated: np.ndarray
    min_pair: np.ndarray
    max_pair: np.ndarray
    final_x: np.ndarray
    final_y: np.ndarray

    def outcome(self, i: int) -> CouplingOutcome:
        tc = self.coalescence_time[i]
        return CouplingOutcome(None if np.isnan(tc) else float(tc), bool(self.order_violated[i]),
                               int(self.min_pair[i]), int(self.max_pair[i]),
                               (int(self.final_x[i]), int(self.final_y[i])))


def batch_streams(rng: RngStream, count: int) -> tuple[int, np.ndarray]:
    """Seed and stream ids for ``count`` trajectories spawned from one stream."""
    return derive_seed(rng.seed, f"batch:{rng.stream_id}"), np.arange(count, dtype=np.uint64)


class _Rates:
    def __init__(self, p: ChainParams):
        states = p.states
        self.up = birth_rate(p, states)
        self.down = death_rate(p, states)
        self.total = self.up + self.down


def _check_starts(p: ChainParams, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64)
    if np.any(xs < 0) or np.any(xs > p.k):
        raise DomainError(f"start states must lie in [0, {p.k}]")
    return xs


def _draws(keys, counters):
    """Exp(1) holding draw and a uniform choice draw for the current event."""
    base = counters * np.uint64(2)
    return -np.log(uniforms(keys, base)), uniforms(keys, base + np.uint64(1))


def simulate_final_states(p: ChainParams, x0s, horizon: float, seed: int, streams) -> np.ndarray:
    """X_horizon for each trajectory, started from x0s[i] on stream streams[i]."""
    if horizon < 0:
        raise DomainError(f"horizon must be non-negative, got {horizon}")
    rates = _Rates(p)
    x = _check_starts(p, np.broadcast_to(x0s, np.shape(streams))).copy()
    keys = stream_keys(seed, streams)
    t = np.zeros(x.size)
    count = np.zeros(x.size, dtype=np.uint64)
    live = np.arange(x.size)
    while live.size:
        xs = x[live]
        hold, choice = _draws(keys[live], count[live])
        r = rates.total[xs]
        tn = t[live] + hold / r
        fire = tn <= horizon
        live = live[fire]
        xs = xs[fire]
        step = np.where(choice[fire] * r[fire] < rates.up[xs], 1, -1)
        x[live] = xs + step
        t[live] = tn[fire]
        count[live] += np.uint64(1)
    return x


def sample_path(p: ChainParams, x0: int, horizon: float, rng: RngStream) -> Trajectory:
    """One exact-event trajectory on [0, horizon] with every jump recorded."""
    if horizon < 0:
        raise DomainError(f"horizon must be non-negative, got {horizon}")
    _check_starts(p, x0)
    rates = _Rates(p)
    key = rng.key
    times, states = [], []
    x, t, j = int(x0), 0.0, 0
    while True:
        hold, choice = _draws(key, np.array([j], dtype=np.uint64))
        r = rates.total[x]
        tn = t + (hold / r)[0]
        if tn > horizon:
            break
        x += 1 if choice[0] * r < rates.up[x] else -1
        t = tn
        j += 1
        times.append(t)
        states.append(x)
    return Trajectory(np.array(times), np.array(states, dtype=np.int64), int(x0), float(horizon))


def run_coupled_batch(p: ChainParams, x0s, y0s, horizon: float, seed: int, streams) -> CouplingBatch:
    """Basic coupling for many pairs.

    Equal states share one clock and one move; unequal states run two
    independent clocks, realised as their superposition with a choice of
    which chain jumps and in which direction.
    """
    if horizon < 0:
        raise DomainError(f"horizon must be non-negative, got {horizon}")
    rates = _Rates(p)
    shape = np.shape(streams)
    x = _check_starts(p, np.broadcast_to(x0s, shape)).copy()
    y = _check_starts(p, np.broadcast_to(y0s, shape)).copy()
    initially_below = x <= y
    keys = stream_keys(seed, streams)
    t = np.zeros(x.size)
    count = np.zeros(x.size, dtype=np.uint64)
    met = np.where(x == y, 0.0, np.nan)
    violated = np.zeros(x.size, dtype=bool)
    lo = np.minimum(x, y)
    hi = np.maximum(x, y)
    live = np.arange(x.size)
    while live.size:
        xs, ys = x[live], y[live]
        hold, choice = _draws(keys[live], count[live])
        same = xs == ys
        bx, dx = rates.up[xs], rates.down[xs]
        by, dy = rates.up[ys], rates.down[ys]
        r = np.where(same, bx + dx, bx + dx + by + dy)
        tn = t[live] + hold / r
        fire = tn <= horizon
        live = live[fire]
        xs, ys, same = xs[fire], ys[fire], same[fire]
        bx, dx, by = bx[fire], dx[fire], by[fire]
        v = choice[fire] * r[fire]
        joint = np.where(v < bx, 1, -1)
        move_x = ~same & (v < bx + dx)
        step_x = np.where(same, joint, np.where(move_x, np.where(v < bx, 1, -1), 0))
        step_y = np.where(same, joint, np.where(move_x, 0, np.where(v < bx + dx + by, 1, -1)))
        xs = xs + step_x
        ys = ys + step_y
        x[live], y[live] = xs, ys
        tn = tn[fire]
        t[live] = tn
        count[live] += np.uint64(1)
        newly = (xs == ys) & np.isnan(met[live])
        met[live[newly]] = tn[newly]
        below = initially_below[live]
        violated[live] |= np.where(below, xs > ys, xs < ys)
        lo[live] = np.minimum(lo[live], np.minimum(xs, ys))
        hi[live] = np.maximum(hi[live], np.maximum(xs, ys))
    return CouplingBatch(met, violated, lo, hi, x, y)


def run_coupled(p: ChainParams, x0: int, y0: int, horizon: float, rng: RngStream) -> CouplingOutcome:
    batch = run_coupled_batch(p, [x0], [y0], horizon, rng.seed, np.array([rng.stream_id], dtype=np.uint64))
    return batch.outcome(0)


def coupled_path(p: ChainParams, x0: int, y0: int, horizon: float, rng: RngStream):
    """Recorded (times, xs, ys) of one coupled pair, using the same draws as run_coupled."""
    rates = _Rates(p)
    _check_starts(p, [x0, y0])
    key = rng.key
    times, xs, ys = [], [], []
    x, y, t, j = int(x0), int(y0), 0.0, 0
    while True:
        hold, choice = _draws(key, np.array([j], dtype=np.uint64))
        bx, dx, by, dy = rates.up[x], rates.down[x], rates.up[y], rates.down[y]
        r = bx + dx if x == y else bx + dx + by + dy
        tn = t + (hold / r)[0]
        if tn > horizon:
            break
        v = choice[0] * r
        if x == y:
            x = y = x + (1 if v < bx else -1)
        elif v < bx + dx:
            x += 1 if v < bx else -1
        else:
            y += 1 if v < bx + dx + by else -1
        t = tn
        j += 1
        times.append(t)
        xs.append(x)
        ys.append(y)
    return np.array(times), np.array(xs, dtype=np.int64), np.array(ys, dtype=np.int64)


def hitting_times_zero(p: ChainParams, x0s, seed: int, streams) -> np.ndarray:
    """First time each trajectory reaches state 0."""
    rates = _Rates(p)
    x = _check_starts(p, np.broadcast_to(x0s, np.shape(streams))).copy()
    keys = stream_keys(seed, streams)
    t = np.zeros(x.size)
    count = np.zeros(x.size, dtype=np.uint64)
    live = np.flatnonzero(x > 0)
    while live.size:
        xs = x[live]
        hold, choice = _draws(keys[live], count[live])
        r = rates.total[xs]
        t[live] += hold / r
        xs = xs + np.where(choice * r < rates.up[xs], 1, -1)
        x[live] = xs
        count[live] += np.uint64(1)
        live = live[xs > 0]
    return t


def hitting_time_zero(p: ChainParams, x0: int, rng: RngStream) -> float:
    return float(hitting_times_zero(p, [x0], rng.seed, np.array([rng.stream_id], dtype=np.uint64))[0])


# exponential sums with more terms than this are drawn via the order-statistic identity
_DIRECT_SUM_LIMIT = 1000


def exp_sum_samples(x: int, y: int, seed: int, streams, method: str = "auto") -> np.ndarray:
    """Samples of S_{x,y} = sum_{z=y+1}^{x} T_z with T_z ~ Exp(z) independent.

    ``direct`` adds the x - y exponentials (term z uses counter z - y - 1).
    ``order`` uses that S_{x,y} is the (x-y)-th smallest of x iid Exp(1)
    variables, so exp(-S_{x,y}) ~ Beta(y+1, x-y); one uniform per sample.
    """
    if not 0 <= y < x:
        raise DomainError(f"need 0 <= y < x, got x={x}, y={y}")
    if method == "auto":
        method = "direct" if x - y <= _DIRECT_SUM_LIMIT else "order"
    keys = stream_keys(seed, streams)
    if method == "direct":
        total = np.zeros(keys.size)
        for z in range(y + 1, x + 1):
            total += -np.log(uniforms(keys, np.uint64(z - y - 1))) / z
        return total
    if method == "order":
        u = uniforms(keys, np.uint64(0))
        if y == 0:
            # exp(-S) = 1 - U^(1/x)
            return -np.log(-np.expm1(np.log(u) / x))
        return -np.log(special.betaincinv(y + 1, x - y, u))
    raise DomainError(f"unknown method {method!r}")


def exp_sum_sample(x: int, y: int, rng: RngStream, method: str = "auto") -> float:
    return float(exp_sum_samples(x, y, rng.seed, np.array([rng.stream_id], dtype=np.uint64), method)[0])


def empirical_pmf(p: ChainParams, x0: int, t: float, samples: int, rng: RngStream) -> Pmf:
    """Histogram of X_t over independent trajectories spawned from ``rng``."""
    if samples < 1:
        raise DomainError(f"samples must be >= 1, got {samples}")
    seed, streams = batch_streams(rng, samples)
    finals = simulate_final_states(p, x0, t, seed, streams)
    counts = np.bincount(finals, minlength=p.k + 1).astype(float)
    return Pmf.on_states(p, counts / samples)


def mean_hitting_time_zero(p: ChainParams, x0: int) -> float:
    """E_x0[tau_0] from the first-step equations (Q h)(x) = -1 on 1..k, h(0) = 0."""
    _check_starts(p, x0)
    if x0 == 0:
        return 0.0
    states = np.arange(1, p.k + 1)
    up, down = birth_rate(p, states), death_rate(p, states)
    # banded rows: super-diagonal, diagonal, sub-diagonal
    ab = np.zeros((3, p.k))
    ab[0, 1:] = up[:-1]
    ab[1] = -(up + down)
    ab[2, :-1] = down[1:]
    h = linalg.solve_banded((1, 1), ab, -np.ones(p.k))
    return float(h[x0 - 1])
