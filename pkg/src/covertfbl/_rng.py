"""Counter-style seeding: every (seed, stream, chunk) triple gets its own generator."""
import zlib

import numpy as np

# stream tags
THRESHOLD = 1
BETA = 2
NULL = 3
CHECK = 4
TVD = 5
CODEBOOK = 6
CHANNEL = 7
OUTPUT = 8

CHUNK_ELEMENTS = 1 << 22


def key_of(value):
    """Stable 32-bit integer for a row label such as an axis value."""
    return zlib.crc32(repr(value).encode()) & 0xFFFFFFFF


def seed_sequence(seed, *path):
    """SeedSequence rooted at ``seed`` with ``path`` appended to its spawn key."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy,
                                      spawn_key=tuple(seed.spawn_key) + tuple(path))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))


def generator(seed, *path):
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *path)))


def chunk_sizes(count, per_chunk):
    full, rest = divmod(int(count), int(per_chunk))
    sizes = [int(per_chunk)] * full
    if rest:
        sizes.append(rest)
    return sizes


def rows_per_chunk(n):
    return max(1, CHUNK_ELEMENTS // max(1, int(n)))
