"""Counter-based uniforms keyed by ``(seed, tag, step, particle)``.

Every draw is a pure function of its key, so a run's output does not depend
on the order in which particles are visited, and the compiled kernels and the
numpy fallback reproduce each other bit for bit. The mixer is the SplitMix64
finaliser; the same constants appear in ``_kernels.pyx``.
"""

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
M1 = 0xBF58476D1CE4E5B9
M2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / 9007199254740992.0

# stream tags
MOVE = 1
PICK = 2
SPAWN = 3
DERIVE = 4
INIT = 5


def mix(z: int) -> int:
    z = (z + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * M1) & MASK
    z = ((z ^ (z >> 27)) * M2) & MASK
    return z ^ (z >> 31)


def step_key(seed: int, tag: int, step: int) -> int:
    return mix(mix(mix(seed & MASK) ^ tag) ^ (step & MASK))


def uniform(seed: int, tag: int, step: int, particle: int) -> float:
    return (mix(step_key(seed, tag, step) ^ particle) >> 11) * INV_2_53


def mix_array(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(M2)
    return z ^ (z >> np.uint64(31))


def uniforms(key: int, particles: np.ndarray) -> np.ndarray:
    """Vectorised ``uniform`` for one step key over many particle indices."""
    h = mix_array(np.uint64(key) ^ particles.astype(np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * INV_2_53


def derive_seed(master: int, index: int) -> int:
    """Child seed; injective in ``index`` for a fixed master."""
    return mix(mix(mix(master & MASK) ^ DERIVE) ^ (index & MASK))


def choose(u: float, m: int) -> int:
    """Map a uniform to ``0..m-1``."""
    return min(int(u * m), m - 1)
