"""Seedable, splittable random streams.

A stream is a plain ``numpy.random.Generator``. Child streams are spawned
from a ``SeedSequence`` so that chain ``k`` of a run seeded with ``seed``
always sees the same numbers, regardless of how many chains run beside it.
"""

import numpy as np

from .types import RandomStream


def make_stream(seed: int | None) -> RandomStream:
    return np.random.default_rng(seed)


def split_streams(seed: int | None, n_streams: int) -> list[RandomStream]:
    children = np.random.SeedSequence(seed).spawn(n_streams)
    return [np.random.default_rng(child) for child in children]
