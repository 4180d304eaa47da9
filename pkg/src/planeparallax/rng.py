"""Seeded, splittable random streams (counter-based Philox)."""
from __future__ import annotations

import numpy as np


def make_rng(seed: int | np.random.SeedSequence = 0) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def split(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` independent generators derived from one seed."""
    return [make_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(n)]
