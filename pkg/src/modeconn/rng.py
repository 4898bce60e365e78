"""Seeded random streams.

All randomness goes through Philox4x64-10 keyed directly by the 64-bit seed
(``key = (seed, 0)``, counter starting at 0). Uniform doubles are
``(next_uint64 >> 11) * 2**-53``; Gaussians come from Box-Muller on pairs of
uniforms and permutations from a Fisher-Yates pass driven by uniforms, so the
streams can be reproduced outside numpy.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(seed):
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


def uniform(rng, size):
    return rng.random(size)


def standard_normal(rng, size):
    """Box-Muller transform; draws ceil(size/2) uniform pairs (u1, u2)."""
    size = int(size)
    if size == 0:
        return np.zeros(0)
    half = (size + 1) // 2
    u = rng.random(2 * half).reshape(half, 2)
    # 1 - u keeps the radius argument in (0, 1]
    radius = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
    angle = 2.0 * np.pi * u[:, 1]
    z = np.empty(2 * half)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:size]


def permutation(rng, n):
    """Fisher-Yates: for i = n-1..1, swap i with floor(u * (i + 1))."""
    perm = np.arange(n)
    if n < 2:
        return perm
    u = rng.random(n - 1)
    for k, i in enumerate(range(n - 1, 0, -1)):
        j = int(u[k] * (i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed, *tags):
    """Deterministic child seed: splitmix64 folded over (seed, *tags)."""
    x = _splitmix64(int(seed) & _MASK64)
    for tag in tags:
        x = _splitmix64(x ^ (int(tag) & _MASK64))
    return x
