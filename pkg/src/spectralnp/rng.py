"""Counter-based random streams.

Every stochastic component draws from a Philox stream keyed by
``(seed, purpose tag, index)``.  Philox is counter-based, so identical keys
give bit-identical draws on any machine, independent of how many other
streams were consumed in between.  This is what makes episode batches,
evaluation caches and frequency noise reproducible and safe to generate in
parallel.
"""

import numpy as np

TAG_EPISODE = 0
TAG_FREQ_NOISE = 1
TAG_RFF = 2
TAG_INIT = 3
TAG_PROBE = 4


def substream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Independent generator for (seed, tag, index)."""
    if not 0 <= tag < 2**16:
        raise ValueError(f"tag out of range: {tag}")
    key = (np.uint64(seed) << np.uint64(16)) | np.uint64(tag)
    return np.random.Generator(np.random.Philox(key=[int(key), int(index)]))
