"""Seeded, splittable random streams.

A stream is identified by ``(seed, stream_id)`` plus an optional path of
derivation keys.  Deriving a child never consumes randomness from the
parent, so work that is skipped (for example a truncation correction over
the whole space) leaves every other draw unchanged.
"""

import zlib

import numpy as np


def _key(k):
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf8"))
    k = int(k)
    if k < 0:
        raise ValueError("stream keys must be non-negative")
    return k


class RngStream:
    """Deterministic random stream built on ``numpy.random.SeedSequence``.

    Parameters
    ----------
    seed : int
        Master seed.
    stream_id : int, optional
        Stream index; replication ``r`` of a study uses ``stream_id=r``.
    path : tuple of int, optional
        Derivation keys below the stream.
    """

    def __init__(self, seed, stream_id=0, path=()):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = seed
        self.stream_id = _key(stream_id)
        self.path = tuple(_key(k) for k in path)
        ss = np.random.SeedSequence(seed, spawn_key=(self.stream_id,) + self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def gen(self):
        """The stateful ``numpy.random.Generator`` for this stream."""
        return self._gen

    def derive(self, *keys):
        """Return an independent child stream; ints or strings as keys."""
        return RngStream(self.seed, self.stream_id, self.path + tuple(keys))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"


def as_stream(rng=None):
    """Coerce ``None``, an int, a Generator or an RngStream to an RngStream.

    A Generator is consumed once to draw a seed.  ``None`` gives fresh
    OS entropy.
    """
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(int(np.random.SeedSequence().entropy % (2**63)))
    if isinstance(rng, np.random.Generator):
        return RngStream(int(rng.integers(0, 2**63 - 1)))
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"cannot build a random stream from {type(rng).__name__}")


def as_generator(rng=None):
    """Coerce to a ``numpy.random.Generator``."""
    if isinstance(rng, np.random.Generator):
        return rng
    return as_stream(rng).gen
