"""Seed derivation and the generator used inside compiled kernels.

Every random stream is named by a tuple of non-negative integers, e.g.
``(root_seed, instance_id, run_index)``.  The tuple goes through numpy's
``SeedSequence`` (root as entropy, the rest as spawn key), so a stream's
values depend only on its name and never on scheduling or worker count.
Kernels consume the derived state with xoshiro256**; families of kernel
streams (all runs of one instance) are carved from one SeedSequence.
"""
from __future__ import annotations

import numba as nb
import numpy as np

MASK64 = (1 << 64) - 1


def seed_sequence(root: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(root) & MASK64, spawn_key=tuple(int(k) for k in key))


def generator(root: int, *key: int) -> np.random.Generator:
    """A numpy Generator for the stream named ``(root, *key)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(root, *key)))


def kernel_state(root: int, *key: int) -> np.ndarray:
    """Four uint64 words seeding one xoshiro256** stream."""
    s = seed_sequence(root, *key).generate_state(4, np.uint64)
    if not s.any():
        s[0] = 1
    return s


def kernel_states(root: int, prefix: tuple[int, ...], count: int, start: int = 0) -> np.ndarray:
    """States ``start..start+count-1`` of the family named ``(root, *prefix)``.

    State ``i`` is words ``4i..4i+3`` of the family's SeedSequence output.
    ``generate_state`` is prefix-stable, so state ``i`` never depends on
    ``count`` or on how a batch is split.
    """
    words = seed_sequence(root, *prefix).generate_state(4 * (start + count), np.uint64)
    out = words[4 * start:].reshape(count, 4).copy()
    out[~out.any(axis=1), 0] = 1
    return out


def child_seed(root: int, *key: int) -> int:
    """A 63-bit integer seed derived from a stream name (for nested experiments)."""
    return int(seed_sequence(root, *key).generate_state(1, np.uint64)[0] >> np.uint64(1))


@nb.njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(cache=True)
def next_double(s):
    """Uniform float in [0, 1) with 53 random bits."""
    return float(next_u64(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def next_below(s, k):
    """Uniform integer in [0, k), by Lemire-style rejection on 64-bit products."""
    bound = np.uint64(k)
    threshold = (np.uint64(0) - bound) % bound
    while True:
        r = next_u64(s)
        lo = r * bound
        if lo >= threshold:
            # high 64 bits of the 128-bit product r * bound
            a_lo = r & np.uint64(0xFFFFFFFF)
            a_hi = r >> np.uint64(32)
            b_lo = bound & np.uint64(0xFFFFFFFF)
            b_hi = bound >> np.uint64(32)
            p0 = a_lo * b_lo
            p1 = a_lo * b_hi
            p2 = a_hi * b_lo
            p3 = a_hi * b_hi
            mid = (p0 >> np.uint64(32)) + (p1 & np.uint64(0xFFFFFFFF)) + (p2 & np.uint64(0xFFFFFFFF))
            hi = p3 + (p1 >> np.uint64(32)) + (p2 >> np.uint64(32)) + (mid >> np.uint64(32))
            return np.int64(hi)


@nb.njit(cache=True)
def shuffle_inplace(s, arr):
    for i in range(arr.shape[0] - 1, 0, -1):
        j = next_below(s, i + 1)
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp
