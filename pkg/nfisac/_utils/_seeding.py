from __future__ import annotations

__all__ = ["Stream", "stream_rng"]

from enum import IntEnum, unique

import numpy as np


@unique
class Stream(IntEnum):
    """
    Independent random streams derived from one master seed.
    """

    SCATTERERS = 0
    GAINS = 1
    SYMBOLS = 2
    NOISE = 3
    CALIBRATION = 4
    RANDOMIZATION = 5
    AM_INIT = 6


def stream_rng(master_seed: int, stream: Stream, /, *indices: int) -> np.random.Generator:
    """
    Returns the generator of `stream` at `indices` (a user, a sweep
    point, a trial...).

    The generator depends only on its arguments, never on how many other
    generators have been created, so tasks can run in any order.

    Examples
    --------
    >>> a = stream_rng(7, Stream.NOISE, 3).standard_normal()
    >>> b = stream_rng(7, Stream.NOISE, 3).standard_normal()
    >>> a == b
    True
    >>> a == stream_rng(7, Stream.NOISE, 4).standard_normal()
    False
    """

    if master_seed < 0:
        raise ValueError(f"master seed must be non-negative, got {master_seed}")

    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=(int(stream), *indices))
    return np.random.default_rng(sequence)
