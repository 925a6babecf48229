"""Counter-based random substreams.

Every stream is a pure function of (master_seed, key...): the key tuple is fed to
SeedSequence as its spawn key and the resulting state seeds a Philox generator. No stream
depends on scheduling, worker count or on which other streams were drawn before it.
"""

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    PATH = 0
    INNER = 1
    INNER2 = 2
    NODE = 3
    PROBE = 4
    DIRECTION = 5


def substream(master_seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def path_normals(master_seed: int, path_indices: np.ndarray, n_steps: int, n: int, *prefix: int) -> np.ndarray:
    """Brownian normals of shape (len(path_indices), n_steps, n), one substream per path."""
    out = np.empty((len(path_indices), n_steps, n))
    for row, index in enumerate(path_indices):
        out[row] = substream(master_seed, Stream.PATH, *prefix, int(index)).standard_normal((n_steps, n))
    return out


def derive_seed(master_seed: int, *key: int) -> int:
    """A child 63-bit seed, for handing a fresh master seed to an independent sub-computation."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def block_normals(master_seed: int, key: tuple[int, ...], n_paths: int, n_steps: int, n: int) -> np.ndarray:
    """Normals of shape (n_paths, n_steps, n) for a whole inner batch keyed by its parent."""
    return substream(master_seed, *key).standard_normal((n_paths, n_steps, n))
