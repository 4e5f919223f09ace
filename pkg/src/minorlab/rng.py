"""Reproducible randomness for the Monte Carlo layers.

All randomness flows from a single 64-bit task seed.  Derived streams are
keyed, not sequential: the normal increments for integration step `s` and
trajectory chunk `c` come from a Philox generator keyed by
(derive(seed), s, c), so the value seen by trajectory `i` at step `s` is a
pure function of (seed, i, s).  Results are therefore identical for any
thread count and stable under enlarging the ensemble (chunks are fixed at
CHUNK trajectories regardless of how the work is scheduled).
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

CHUNK = 65536

_MASK = (1 << 64) - 1


def _mix(h: int, v: int) -> int:
    # splitmix64 finalizer, used as a tiny keyed hash
    h = (h + 0x9E3779B97F4A7C15 + v) & _MASK
    z = h
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_seed(seed: int, *tags) -> int:
    """Stable 64-bit stream key from a seed and a tag path.

    Tags may be ints or short strings (task names, start indices, ...).
    """
    h = _mix(0x8F1B_BCDC_2B7E_1516, seed & _MASK)
    for t in tags:
        if isinstance(t, str):
            for b in t.encode():
                h = _mix(h, b)
            h = _mix(h, 0x5F)
        else:
            h = _mix(h, int(t) & _MASK)
    return h


def _gen(key: int, *subkeys: int) -> Generator:
    k = key
    for s in subkeys:
        k = _mix(k, s)
    return Generator(Philox(key=[k, 0xA5A5_5A5A_0F0F_F0F0]))


def normal_block(key: int, step: int, lo: int, hi: int, width: int) -> np.ndarray:
    """Standard normals for trajectories [lo, hi) at one step, shape
    (hi - lo, width).  Chunk-keyed: independent of scheduling."""
    out = np.empty((hi - lo, width))
    c0, c1 = lo // CHUNK, (hi - 1) // CHUNK
    for c in range(c0, c1 + 1):
        g = _gen(key, step, c)
        block = g.standard_normal((CHUNK, width)) if width else None
        a, b = max(lo, c * CHUNK), min(hi, (c + 1) * CHUNK)
        out[a - lo : b - lo] = block[a - c * CHUNK : b - c * CHUNK]
    return out


def uniform_vector(key: int, tag: int, n: int) -> np.ndarray:
    """n uniforms on [0, 1), chunk-keyed like normal_block."""
    out = np.empty(n)
    for c in range((n - 1) // CHUNK + 1):
        g = _gen(key, tag, c)
        a, b = c * CHUNK, min(n, (c + 1) * CHUNK)
        out[a:b] = g.random(CHUNK)[: b - a]
    return out


def exponential_vector(key: int, tag: int, n: int, rate: float) -> np.ndarray:
    """n Exp(rate) draws via inverse CDF on the keyed uniform stream."""
    u = uniform_vector(key, tag, n)
    return -np.log1p(-u) / rate
