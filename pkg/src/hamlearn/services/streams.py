"""Counter-based random streams split from one root seed."""

import numpy as np

INITIAL_STATE_STREAM = 0
NOISE_STREAM = 1
DIAGNOSTICS_STREAM = 2


def rng_stream(seed: int, stream: int) -> np.random.Generator:
    """Independent Philox generator for one pipeline stage.

    The same (seed, stream) pair always yields the same sequence, whatever
    else has been drawn from other streams.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be nonnegative")
    sequence = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(sequence))
