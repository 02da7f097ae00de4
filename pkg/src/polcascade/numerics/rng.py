"""Seeded, splittable random streams."""

import numpy as np

from ..errors import InvalidArgumentError

_U64 = 1 << 64


class RandomStream:
    """A numpy Generator keyed by (seed, stream_id).

    Streams with different ids come from distinct SeedSequence spawn keys
    and are statistically independent by construction.
    """

    def __init__(self, seed, stream_id=0):
        seed, stream_id = int(seed), int(stream_id)
        if not (0 <= seed < _U64 and 0 <= stream_id < _U64):
            raise InvalidArgumentError("RandomStream: seed and stream_id must be 64-bit unsigned")
        self.seed = seed
        self.stream_id = stream_id
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def uniform(self, size=None):
        return self.generator.random(size)

    def spawn(self, n, offset=0):
        """``n`` sibling streams sharing this seed, ids offset+0 .. offset+n-1."""
        return [RandomStream(self.seed, offset + k) for k in range(n)]

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"
