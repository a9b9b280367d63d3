import dataclasses

import numpy as np
import pytest

from nibble import engine, rng
from nibble.trajectory import build_tables


def random_state(N, seed, steps=2, p=None):
    """Mid-process state from real engine steps, optionally with a denser p."""
    table = build_tables(N, 0.3, 0.5, n=max(1, (N - 1) // 4), steps=steps)
    if p is not None:
        table = dataclasses.replace(table, p=p)
    streams = rng.CoinStreams(seed)
    st = engine.init(N)
    for _ in range(steps):
        st, _ = engine.step(st, table, streams)
    return st, table, streams


def scrambled_state(N, seed):
    """Arbitrary (not process-reachable) mix of open / kept / removed / closed."""
    gen = np.random.default_rng(seed)
    st = engine.init(N)
    probs = gen.dirichlet([4, 1, 1, 2])
    st.states[:] = gen.choice([0, 1, 2, 5], size=st.M, p=probs).astype(np.int8)
    return st


@pytest.fixture
def small_state():
    return random_state(12, seed=5, steps=2, p=0.08)
