"""Counter-based random numbers keyed by (seed, trial, stream, index).

Every uniform is a pure function of its key, so any edge of any trial can be
regenerated in isolation and trials can be split across workers freely.
The block function is Philox4x32-10; each call yields four 32-bit words,
which serve four consecutive indices.
"""

import numpy as np

MASK32 = 0xFFFFFFFF
PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85

# stream ids; keep stable, outputs depend on them
STREAM_BOND = 0
STREAM_TILE_U = 1
STREAM_SITE = 2
STREAM_CONTINUUM = 3
STREAM_COUPLED = 4

_TWO32 = float(2 ** 32)


def philox4x32(counter, key, rounds=10):
    """Philox4x32 block function on broadcastable uint64 arrays.

    ``counter`` is a 4-sequence and ``key`` a 2-sequence of arrays (or ints)
    holding 32-bit values. Returns four uint64 arrays of 32-bit words.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in counter)
    k0, k1 = (int(k) & MASK32 for k in key)
    m0 = np.uint64(PHILOX_M0)
    m1 = np.uint64(PHILOX_M1)
    mask = np.uint64(MASK32)
    s32 = np.uint64(32)
    for _ in range(rounds):
        p0 = c0 * m0
        p1 = c2 * m1
        c0, c1, c2, c3 = (
            (p1 >> s32) ^ c1 ^ np.uint64(k0),
            p1 & mask,
            (p0 >> s32) ^ c3 ^ np.uint64(k1),
            p0 & mask,
        )
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return c0, c1, c2, c3


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def uniforms(seed, trials, indices, stream=STREAM_BOND):
    """Uniforms in [0, 1) with shape ``(len(trials), len(indices))``.

    Entry ``[i, j]`` depends only on ``(seed, trials[i], stream, indices[j])``.
    Resolution is 2**-32.
    """
    seed = _check_seed(seed)
    trials = np.atleast_1d(np.asarray(trials, dtype=np.int64))
    indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    if trials.size and (trials.min() < 0 or trials.max() > MASK32):
        raise ValueError("trial indices must fit in 32 bits")
    if indices.size and indices.min() < 0:
        raise ValueError("indices must be nonnegative")
    out = np.empty((trials.size, indices.size), dtype=np.float64)
    if trials.size == 0 or indices.size == 0:
        return out
    blocks, inverse = np.unique(indices >> 2, return_inverse=True)
    lanes = (indices & 3).astype(np.intp)
    blocks = blocks.astype(np.uint64)
    words = philox4x32(
        (blocks & np.uint64(MASK32), blocks >> np.uint64(32),
         trials.astype(np.uint64)[:, None], int(stream) & MASK32),
        (seed & MASK32, seed >> 32),
    )
    stacked = np.stack([np.broadcast_to(w, (trials.size, blocks.size)) for w in words])
    out[:] = stacked[lanes, :, inverse].T / _TWO32
    return out


def generator(seed, trial, stream=STREAM_CONTINUUM):
    """A numpy Generator deterministic in ``(seed, trial, stream)``.

    Used where sequential draws are natural (point processes).
    """
    seed = _check_seed(seed)
    key = seed | (int(trial) << 64)
    bitgen = np.random.Philox(key=key, counter=[0, 0, 0, int(stream)])
    return np.random.Generator(bitgen)
