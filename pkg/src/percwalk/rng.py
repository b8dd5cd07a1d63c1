"""Counter-based random numbers.

Every draw is a pure function of ``(seed, stream, counters...)``, so an edge
weight or the k-th holding time of a walk can be regenerated without replaying
any other draw.  The mixing function is the SplitMix64 finalizer applied to a
running 64-bit state, vectorized over numpy arrays.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# stream tags; keep these stable, they are part of the reproducibility contract
STREAM_EDGE_ATOM = 1
STREAM_EDGE_VALUE = 2
STREAM_HOLD = 11
STREAM_JUMP = 12
STREAM_MISC = 99


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def _as_u64(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype == np.uint64:
        return a
    return np.ascontiguousarray(a, dtype=np.int64).view(np.uint64)


def hash_keys(seed: int, stream: int, *counters) -> np.ndarray:
    """Hash ``(seed, stream, counters...)`` to uint64, broadcasting the counters."""
    with np.errstate(over="ignore"):
        s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        h = _mix(np.asarray(s ^ (_GOLDEN * np.uint64(stream + 1)), dtype=np.uint64))
        if not counters:
            return h
        arrays = np.broadcast_arrays(*[_as_u64(c) for c in counters])
        h = np.broadcast_to(h, arrays[0].shape).copy()
        for a in arrays:
            h = _mix((h + _GOLDEN) ^ a)
        return h


def uniform(seed: int, stream: int, *counters) -> np.ndarray:
    """Uniform draws in the open interval (0, 1)."""
    h = hash_keys(seed, stream, *counters)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def exponential(seed: int, stream: int, *counters) -> np.ndarray:
    """Unit-rate exponential draws by inverse CDF."""
    return -np.log(uniform(seed, stream, *counters))


def derive_seed(seed: int, *labels: int) -> int:
    """A child seed, e.g. one per path of a batch."""
    return int(np.ravel(hash_keys(seed, STREAM_MISC, *labels))[0])
