"""Seeded random streams.

Stream-splitting rule: the generator for one recommendation request is
``PCG64(SeedSequence([seed, user_id, variant_code]))``. Streams for different
users or variants are statistically independent and do not depend on the
order in which requests are processed.
"""

from __future__ import annotations

import secrets

import numpy as np

VARIANT_CODES = {"A": 0, "B": 1, "C": 2}


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


def request_rng(seed: int, user_id: int, variant: str) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([int(seed), int(user_id), VARIANT_CODES[variant]]))
    )


def fresh_seed() -> int:
    return secrets.randbits(63)
