"""Seed handling.

All randomness goes through :class:`numpy.random.Generator` backed by PCG64.
Child streams are derived with :class:`numpy.random.SeedSequence` using the
master seed as entropy and a tuple of integer keys as ``spawn_key``, so a
child stream depends only on ``(master, keys)`` and never on evaluation order.
"""

import zlib

import numpy as np

SEED_BITS = 64


def make_rng(seed, *keys):
    """Return a PCG64 generator for ``seed`` (optionally split by ``keys``)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))))


def derive_seed(master, *keys):
    """Derive a 64-bit child seed from ``master`` and integer ``keys``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def label_key(label):
    # CRC32 keeps per-setting streams stable when settings are added or filtered.
    return zlib.crc32(str(label).encode("utf-8"))
