"""Parameter initialisation."""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy

Seed = Union[int, numpy.random.Generator, None]


def as_generator(seed: Seed) -> numpy.random.Generator:
    if isinstance(seed, numpy.random.Generator):
        return seed
    return numpy.random.default_rng(seed)


def fan_avg_limit(fan_in: int, fan_out: int) -> float:
    """Half-width of the fan-average uniform distribution.

    >>> fan_avg_limit(2, 4)
    1.0
    """
    return math.sqrt(6.0 / (fan_in + fan_out))


def fan_avg_init(shape: Sequence[int], seed: Seed = None) -> numpy.ndarray:
    """Uniform samples on ``[-L, L]`` with ``L = sqrt(6 / (fan_in + fan_out))``.

    ``fan_in`` is the first extent and ``fan_out`` the last; a vector uses its
    length for both.
    """
    shape = tuple(int(s) for s in shape)
    if not shape or any(s <= 0 for s in shape):
        raise ValueError(f"fan_avg_init needs positive extents, got {shape}")
    limit = fan_avg_limit(shape[0], shape[-1])
    return as_generator(seed).uniform(-limit, limit, size=shape)
