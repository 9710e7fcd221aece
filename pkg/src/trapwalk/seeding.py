"""Named, splittable random streams derived from one master seed."""

from __future__ import annotations

import zlib

import numpy as np

from .errors import ValidationError

STREAM_NAMES = ("env", "limit", "mc")


def stream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, name, *index)``.

    The stream depends only on its key, never on the order in which streams
    are requested, so parallel workers reproduce serial results bit for bit.

    Parameters
    ----------
    seed : int
        Non-negative master seed (up to 64 bits).
    name : str
        Stream label, one of ``"env"``, ``"limit"`` or ``"mc"``.
    *index : int
        Optional non-negative sub-indexes (environment number, replicate ...).
    """
    if name not in STREAM_NAMES:
        raise ValidationError(f"unknown stream name {name!r}; expected one of {STREAM_NAMES}")
    if int(seed) < 0 or any(int(i) < 0 for i in index):
        raise ValidationError("seed and stream indexes must be non-negative")
    key = (zlib.crc32(name.encode("ascii")),) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))
