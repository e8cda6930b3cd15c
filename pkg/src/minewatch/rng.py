"""Keyed deterministic randomness for reproducible simulation traces.

Every random draw in the simulator is a pure function of (seed, key words):
there is no shared generator state, so results never depend on evaluation
order, thread scheduling, or how many draws other components made. The same
config therefore replays to byte-identical traces.

The algorithm is pinned; changing any constant changes every trace.

- ``mix64`` is the SplitMix64 finalizer (constants 0xBF58476D1CE4E5B9 and
  0x94D049BB133111EB, shifts 30/27/31).
- A stream seeded at state ``s`` produces output ``i`` as
  ``mix64(s + (i + 1) * 0x9E3779B97F4A7C15)``.
- ``derive_key`` folds words into a key: ``h = mix64(stream_step(h) ^ word)``
  per word, order-sensitive.
- Uniforms take the top 53 bits: ``u = (h >> 11) * 2**-53`` in [0, 1).
- Gaussians use Box-Muller on stream outputs 0 and 1 of the key:
  ``z = sqrt(-2 ln u1) * cos(2 pi u2)`` with ``u1 = ((h0 >> 11) + 1) * 2**-53``
  in (0, 1] so the log is always finite.
"""

from __future__ import annotations

import math

_M64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 2.0**-53

# Domain tags keep key spaces of the three consumers disjoint.
DOMAIN_ENV = 1
DOMAIN_LINK = 2
DOMAIN_SENSOR = 3


def mix64(z: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit word."""
    z &= _M64
    z = ((z ^ (z >> 30)) * _MIX1) & _M64
    z = ((z ^ (z >> 27)) * _MIX2) & _M64
    return z ^ (z >> 31)


def derive_key(seed: int, *words: int) -> int:
    """Fold integer words into seed, producing a 64-bit stream key.

    Word order matters. Callers must make their word tuples prefix-free
    (lead with a domain tag, include lengths before variable-size parts).
    """
    h = seed & _M64
    for w in words:
        h = mix64(((h + _GAMMA) & _M64) ^ (w & _M64))
    return h


def draw64(key: int, index: int = 0) -> int:
    """The index-th 64-bit output of the stream seeded at key."""
    return mix64((key + (index + 1) * _GAMMA) & _M64)


def uniform(key: int, index: int = 0) -> float:
    """Deterministic uniform in [0, 1) from a key's stream."""
    return (draw64(key, index) >> 11) * _INV53


def gaussian(key: int, index: int = 0) -> float:
    """Deterministic standard normal from a key's stream (Box-Muller).

    Consumes stream outputs 2*index and 2*index + 1.
    """
    u1 = ((draw64(key, 2 * index) >> 11) + 1) * _INV53
    u2 = (draw64(key, 2 * index + 1) >> 11) * _INV53
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
