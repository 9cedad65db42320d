"""Small shared helpers (RNG plumbing, numeric guards)."""

from __future__ import annotations

import math

import numpy as np


def as_generator(seed) -> np.random.Generator:
    """Return a Generator; ints and SeedSequences seed a new one, Generators pass through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def seeded_rng(*key: int) -> np.random.Generator:
    """Deterministic generator derived from a tuple of integers.

    The whole tuple feeds one SeedSequence, so streams built from different
    tuples are statistically independent and do not depend on the order in
    which runs are scheduled.
    """
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def ceil_snapped(x: float, rel_tol: float = 1e-9) -> int:
    """Ceiling that first snaps values within rel_tol of an exact integer.

    Guards against float powers such as 100**0.5 landing a hair above the
    true integer and getting ceiled one too far.
    """
    nearest = round(x)
    if abs(x - nearest) <= rel_tol * max(1.0, abs(x)):
        return int(nearest)
    return int(math.ceil(x))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly symmetric complex normal draws, shape `shape`."""
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
