"""Counter-style deterministic random draws.

Shadowing/fading realizations must not depend on the order in which pixels
are evaluated, so instead of a stateful stream we hash (seed, stream salt,
pixel index) to a uniform and push it through the normal inverse CDF.  The
mixer is SplitMix64, which is cheap, stateless and good enough for
simulation noise.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x):
    """One SplitMix64 mixing round. Accepts uint64 scalars or arrays."""
    # uint64 wraparound is the point of the mixer; silence numpy's overflow
    # warnings locally instead of leaking state into the caller.
    with np.errstate(over="ignore"):
        x = (np.asarray(x, dtype=np.uint64) + _GAMMA).astype(np.uint64)
        x ^= x >> np.uint64(30)
        x = (x * _M1).astype(np.uint64)
        x ^= x >> np.uint64(27)
        x = (x * _M2).astype(np.uint64)
        x ^= x >> np.uint64(31)
    return x


def _as_u64(value) -> np.uint64:
    return np.uint64(np.int64(value).view(np.uint64) if value < 0 else np.uint64(value))


def stream_key(seed: int, *salts) -> np.uint64:
    """Collapse a seed plus arbitrary integer/float salts into one 64-bit key."""
    key = splitmix64(_as_u64(int(seed)))
    for salt in salts:
        if isinstance(salt, float):
            bits = np.float64(salt).view(np.uint64)
        else:
            bits = _as_u64(int(salt))
        key = splitmix64(key ^ bits)
    return key


def hashed_uniform(key: np.uint64, index) -> np.ndarray:
    """Uniform(0, 1) draws keyed on (key, index); index may be an array."""
    idx = np.asarray(index, dtype=np.uint64)
    h = splitmix64(np.uint64(key) ^ idx)
    # 53 mantissa bits, offset by half a ulp so 0 and 1 are never returned.
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def hashed_normal(key: np.uint64, index, sigma: float = 1.0) -> np.ndarray:
    """N(0, sigma^2) draws keyed on (key, index)."""
    return ndtri(hashed_uniform(key, index)) * sigma
