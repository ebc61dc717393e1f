"""Vectorised counter-based random numbers (Philox4x64-10).

Every draw is a pure function of ``(key, counter)``, so the random stream of
one trajectory depends only on ``(seed, trajectory index, event index)`` and
not on how the ensemble is split between workers. numpy ships the same
generator as :class:`numpy.random.Philox`, but only as a sequential stream;
here the counter is an array so that one call produces one block per
trajectory.
"""

import numpy as np

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_MUL0 = np.uint64(0xD2E7470EE14C6C93)
_MUL1 = np.uint64(0xCA5A826395121157)
_WEYL0 = np.uint64(0x9E3779B97F4A7C15)
_WEYL1 = np.uint64(0xBB67AE8584CAA73B)
_ROUNDS = 10

# stream tags, stored in the second key word
TAG_SAMPLE = 1
TAG_EVOLVE = 2


def _mulhilo(a, b):
    """Full 64x64 -> 128 bit product, returned as (high, low) words."""
    a_lo, a_hi = a & _M32, a >> _S32
    b_lo, b_hi = b & _M32, b >> _S32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    cross = (lo_lo >> _S32) + (hi_lo & _M32) + a_lo * b_hi
    hi = a_hi * b_hi + (hi_lo >> _S32) + (cross >> _S32)
    lo = (cross << _S32) | (lo_lo & _M32)
    return hi, lo


def philox4x64(counter, key):
    """Apply the Philox4x64-10 bijection.

    Args:
        counter: sequence of four uint64 arrays (broadcastable).
        key: pair of uint64 scalars.

    Returns:
        tuple of four uint64 arrays.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in counter)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(key[0])
    k1 = np.uint64(key[1])
    with np.errstate(over="ignore"):
        for r in range(_ROUNDS):
            if r:
                k0 = k0 + _WEYL0
                k1 = k1 + _WEYL1
            hi0, lo0 = _mulhilo(_MUL0, c0)
            hi1, lo1 = _mulhilo(_MUL1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def to_unit(bits):
    """Map uint64 words to doubles uniform on [0, 1) using the top 53 bits."""
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def uniforms(seed, tag, index, step):
    """Four independent U[0,1) arrays for each entry of ``index``.

    Args:
        seed: user seed (reduced modulo 2**64).
        tag: stream tag separating unrelated uses of the same seed.
        index: integer array of trajectory indices.
        step: event counter within the trajectory (scalar or array).
    """
    key = (int(seed) % 2**64, int(tag) % 2**64)
    index = np.asarray(index, dtype=np.uint64)
    step = np.broadcast_to(np.asarray(step, dtype=np.uint64), index.shape)
    zero = np.zeros_like(index)
    return tuple(to_unit(w) for w in philox4x64((index, step, zero, zero), key))


def normals(seed, tag, index, step):
    """Two independent standard normal arrays via Box-Muller."""
    u0, u1, _, _ = uniforms(seed, tag, index, step)
    radius = np.sqrt(-2.0 * np.log1p(-u0))
    angle = 2.0 * np.pi * u1
    return radius * np.cos(angle), radius * np.sin(angle)


def derive_seed(seed, *words):
    """Deterministic child seed for ``(seed, *words)`` (e.g. a time bin)."""
    ss = np.random.SeedSequence([int(seed) % 2**64, *[int(w) for w in words]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
