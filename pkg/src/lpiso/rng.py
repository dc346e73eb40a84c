"""Named, reproducible random streams.

A stream is identified by ``(seed, purpose, rep)``.  It is built as::

    SeedSequence(entropy=seed, spawn_key=(crc32(purpose.encode()), rep))

wrapped in a PCG64 generator.  Any implementation with NumPy's SeedSequence
and PCG64 can rebuild the exact same draws from those three values, and the
stream for replication ``rep`` never depends on how replications are split
across workers.
"""
import zlib

import numpy as np


def purpose_key(purpose):
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed, purpose, rep=0):
    """Return the generator for one (seed, purpose, replication) triple."""
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=(purpose_key(purpose), int(rep)))
    return np.random.Generator(np.random.PCG64(ss))


def streams(seed, purpose, reps):
    """Generators for replications ``reps`` (an iterable of ints)."""
    return [stream(seed, purpose, r) for r in reps]
