"""Counter-based random streams.

Every stochastic routine in this package draws from a Philox generator keyed
by (seed, purpose, block).  A "block" is a fixed-size slice of the trial
index range, so the randomness consumed by trial i is a pure function of the
seed and i, never of how many workers processed the run or in what order.
Merging per-block tallies is plain integer addition, which keeps results
bit-identical for any worker count.

Purposes separate logically independent streams: the emission log (hidden
polarizations, photon counts) must replay identically whether or not a
measurement apparatus consumed randomness alongside it.
"""

import numpy as np

# Trials per block.  Also the vectorization granularity of the engines.
BLOCK_SIZE = 1 << 16

# Stream purposes.  Keep these stable: they are part of the reproducibility
# contract along with the draw order inside each block.
EMISSION_STREAM = 1
MEASUREMENT_STREAM = 2
FS_STREAM = 3

_MASK64 = (1 << 64) - 1
_PURPOSE_SHIFT = 48


def stream(seed, purpose, block):
    """Return a fresh Generator for one (seed, purpose, block) triple."""
    if block >= (1 << _PURPOSE_SHIFT):
        raise ValueError(f"block index {block} out of range")
    key = np.array(
        [seed & _MASK64, (purpose << _PURPOSE_SHIFT) | block],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def block_ranges(trials):
    """Yield (block_index, start, size) slices covering range(trials)."""
    block = 0
    start = 0
    while start < trials:
        size = min(BLOCK_SIZE, trials - start)
        yield block, start, size
        block += 1
        start += size
