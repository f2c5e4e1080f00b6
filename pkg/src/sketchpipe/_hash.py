"""Counter-based random streams built on the splitmix64 finalizer.

Every random decision in the sketching pipeline is a pure function of
(seed, column index, coordinate index), so columns can be processed in any
order, in parallel, or in chunks and still produce bit-identical output.
Only the 64-bit seeds are ever stored.
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# domain separators so sign and sampling streams never collide
_TAG_SIGN = np.uint64(0x53494748)
_TAG_SAMPLE = np.uint64(0x53414D50)


def mix64(z):
    """splitmix64 finalizer, elementwise on uint64 arrays (wraps mod 2**64)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _as_u64(seed):
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def derive_seed(seed, tag):
    """Derive an independent 64-bit stream seed from (seed, tag)."""
    return int(mix64(_as_u64(seed) ^ _as_u64(tag)))


def sign_array(sign_seed, p):
    """Deterministic +-1 signs for coordinates 0..p-1, equiprobable per entry."""
    state = mix64(_as_u64(sign_seed) ^ _TAG_SIGN)
    j = np.arange(1, p + 1, dtype=np.uint64)
    bits = mix64(state + _GAMMA * j) >> np.uint64(63)
    return 1.0 - 2.0 * bits.astype(np.float64)


def column_keys(master_seed, i0, i1, p):
    """uint64 key matrix with row c holding the keys of column i0+c.

    Row i is an independent splitmix64 stream keyed by the column index, so
    key(seed, i, j) never depends on which other columns were generated.
    """
    state = mix64(_as_u64(master_seed) ^ _TAG_SAMPLE)
    cols = np.arange(i0 + 1, i1 + 1, dtype=np.uint64)
    col_state = mix64(state + _GAMMA * cols)
    j = np.arange(1, p + 1, dtype=np.uint64)
    return mix64(col_state[:, None] + _GAMMA * j[None, :])


def uniform01(keys):
    """Map uint64 keys to doubles in [0, 1)."""
    return (keys >> np.uint64(11)).astype(np.float64) * (2.0**-53)
