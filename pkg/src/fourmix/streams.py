"""Named random sub-streams derived from a single run seed."""

import numpy as np

STREAMS = {"init": 1, "batching": 2, "split": 3, "sampler": 4, "bootstrap": 5, "em": 6, "series": 7}


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for ``name``; the same (seed, name) always yields the same stream."""
    try:
        return np.random.default_rng([int(seed), STREAMS[name]])
    except KeyError:
        raise ValueError(f"unknown stream {name!r}") from None
