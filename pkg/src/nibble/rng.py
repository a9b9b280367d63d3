"""Counter-based coin streams.

Every coin is a pure function of (run seed, stream tag, step, triple rank):
the Philox key is derived from (seed, tag, step) and the coin for rank r is
the r-th double of that keyed stream. Coins therefore do not depend on scan
order, and the Gamma and Y streams are independent.
"""

import numpy as np

GAMMA = 1
STABILIZER = 2
SAMPLING = 3


class CoinStreams:
    def __init__(self, seed):
        self.seed = int(seed)
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def generator(self, tag, step):
        ss = np.random.SeedSequence([self.seed & 0xFFFFFFFF, self.seed >> 32, tag, step])
        key = ss.generate_state(2, dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def uniforms(self, tag, step, count):
        """Uniform coins for ranks 0..count-1."""
        return self.generator(tag, step).random(count)

    def coins(self, tag, step, ranks, count):
        """Coins for the given ranks, out of a universe of `count` ranks."""
        return self.uniforms(tag, step, count)[np.asarray(ranks, dtype=np.int64)]
