"""Per-sample random streams derived from one master seed.

``derive_seed`` folds (master_seed, sample_index, stage) through SplitMix64
finalizers::

    h = mix(master_seed)
    h = mix(h ^ sample_index)
    h = mix(h ^ stage)

with ``mix(z) = splitmix64_finalize(z + 0x9E3779B97F4A7C15)`` over 64-bit
wrap-around arithmetic. The result seeds numpy's PCG64. Everything here is
integer arithmetic, so streams are identical on every platform.
"""
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# stage tags keep the consumers of one sample independent of each other
STAGE_TEXT = 1
STAGE_STYLE = 2
STAGE_NEIGHBOR = 3
STAGE_ARTIFACTS = 4
STAGE_PHOTOMETRIC = 5
STAGE_GEOMETRIC = 6


def splitmix64(z: int) -> int:
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, sample_index: int, stage: int = 0) -> int:
    h = splitmix64(master_seed & MASK64)
    h = splitmix64(h ^ (sample_index & MASK64))
    return splitmix64(h ^ (stage & MASK64))


def derive_stream(master_seed: int, sample_index: int, stage: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, index, stage) triple."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, sample_index, stage)))
