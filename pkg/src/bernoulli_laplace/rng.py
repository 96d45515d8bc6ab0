"""Counter-based random streams.

Every draw is a pure function of (seed, stream_id, counter), computed with
the SplitMix64 finaliser.  A stream is a SplitMix64 sequence started from a
key derived from (seed, stream_id), so vectorised simulation over many
trajectories gives the same numbers as simulating each one alone, in any
order and on any number of workers.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STREAM_SALT = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_TO_UNIT = 2.0**-53


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _u64(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype.kind in "iu":
        if np.any(arr < 0):
            raise ValueError("seeds, stream ids and counters must be non-negative")
        return arr.astype(np.uint64)
    return np.asarray(np.vectorize(lambda v: int(v) & _MASK, otypes=[np.uint64])(arr))


def stream_keys(seed, stream_ids) -> np.ndarray:
    with np.errstate(over="ignore"):
        s = _mix(_u64(seed) + _GOLDEN)
        return _mix(s ^ (_u64(stream_ids) * _STREAM_SALT + _GOLDEN))


def raw_bits(keys: np.ndarray, counters) -> np.ndarray:
    with np.errstate(over="ignore"):
        return _mix(keys + (_u64(counters) + np.uint64(1)) * _GOLDEN)


def uniforms(keys: np.ndarray, counters) -> np.ndarray:
    """Doubles strictly inside (0, 1): 53 random bits, offset by half a unit."""
    bits = raw_bits(keys, counters) >> _S11
    return (bits.astype(np.float64) + 0.5) * _TO_UNIT


@dataclass(frozen=True)
class RngStream:
    """One reproducible stream; (seed, stream_id) fixes every draw."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v <= _MASK:
                raise ValueError(f"{name} must be a 64-bit unsigned value, got {v}")

    @property
    def key(self) -> np.ndarray:
        return stream_keys(np.uint64(self.seed), np.uint64(self.stream_id))

    def uniforms(self, start: int, count: int) -> np.ndarray:
        return uniforms(self.key, np.arange(start, start + count, dtype=np.uint64))


def derive_seed(seed: int, label: str) -> int:
    """Seed for a named experiment, so experiments sharing a master seed never share streams."""
    tag = np.uint64(zlib.crc32(label.encode()))
    with np.errstate(over="ignore"):
        return int(_mix(_u64(seed) ^ _mix(tag + _STREAM_SALT)))
