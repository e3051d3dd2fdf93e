"""Deterministic seed derivation for replicated experiments.

Every replicate gets its own 64-bit seed derived from (base_seed,
replicate_index) with SplitMix64, so streams are reproducible across runs
and independent of worker scheduling.  Generators are numpy PCG64; the
family name recorded in run manifests is GENERATOR_FAMILY.
"""

import numpy as np

GENERATOR_FAMILY = "pcg64+splitmix64"

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 step: a bijective 64-bit mix with good avalanche."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, *indices: int) -> int:
    """Stable 64-bit seed for a (base_seed, index, ...) tuple.

    Chaining SplitMix64 over the indices keeps replicate streams and
    per-component sub-streams (effects, genotypes, noise) disjoint.
    """
    s = splitmix64(base_seed & _MASK64)
    for i in indices:
        s = splitmix64((s ^ (i & _MASK64)) & _MASK64)
    return s


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
