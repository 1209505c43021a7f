"""Seed handling: one root seed, named independent sub-streams."""

import zlib

import numpy as np


def substream(seed, *names):
    """Return a ``np.random.Generator`` derived from ``seed`` and a name path.

    The same (seed, names) pair always yields the same stream; different
    names yield statistically independent streams.
    """
    key = tuple(zlib.crc32(str(n).encode("utf-8")) for n in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def child_seed(rng):
    """Draw a fresh integer seed from ``rng`` (for handing to workers)."""
    return int(rng.integers(0, 2**63 - 1))


def get_state(rng):
    return rng.bit_generator.state


def set_state(rng, state):
    rng.bit_generator.state = state
    return rng
