from __future__ import annotations

import numpy as np

_U64_MAX = (1 << 64) - 1

# Round t of a run draws its batch from stream t; auxiliary consumers take
# ids from the reserved top range so they can never collide with a round.
CALIBRATION_STREAM = 1 << 63
PROBE_STREAM = (1 << 63) + 1
SGD_STREAM = (1 << 63) + 2


def seeded_rng(seed: int, stream_id: int) -> np.random.Generator:
    """Return a Philox generator keyed on (seed, stream_id).

    Philox is counter based: the key fixes the stream and the counter starts at
    zero, so equal pairs replay identically and distinct pairs are independent
    without any shared state between workers.
    """
    if not 0 <= seed <= _U64_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= stream_id <= _U64_MAX:
        raise ValueError(f"stream_id must be a 64-bit unsigned integer, got {stream_id}")
    return np.random.Generator(np.random.Philox(key=(stream_id << 64) | seed))


def round_rng(seed: int, round_index: int) -> np.random.Generator:
    return seeded_rng(seed, round_index)
