"""Colex ranking of 3-subsets and K4^- configurations.

A triple {a < b < c} of [N] is identified with its colexicographic rank
C(c,3) + C(b,2) + a, which does not depend on N.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np


def _check_sorted(vertices, k):
    if len(vertices) != k:
        raise ValueError(f"expected {k} vertices, got {len(vertices)}")
    if vertices[0] < 0:
        raise ValueError(f"negative vertex in {tuple(vertices)}")
    for lo, hi in zip(vertices, vertices[1:]):
        if not lo < hi:
            raise ValueError(f"vertices must be strictly increasing: {tuple(vertices)}")


def rank(triple, N=None):
    """Colex rank of a sorted triple. Unsorted input is rejected."""
    a, b, c = (int(v) for v in triple)
    _check_sorted((a, b, c), 3)
    if N is not None and c >= N:
        raise ValueError(f"vertex {c} out of range for N={N}")
    return c * (c - 1) * (c - 2) // 6 + b * (b - 1) // 2 + a


def _largest_below(r, k):
    # largest v with C(v, k) <= r
    v = k - 1
    while comb(v + 1, k) <= r:
        v += 1
    return v


def unrank(r):
    if r < 0:
        raise ValueError(f"negative rank {r}")
    r = int(r)
    # start near the cube root to avoid a long scan
    c = max(2, int(round((6 * r) ** (1 / 3))) - 2)
    while comb(c, 3) > r:
        c -= 1
    while comb(c + 1, 3) <= r:
        c += 1
    r -= comb(c, 3)
    b = _largest_below(r, 2)
    r -= comb(b, 2)
    return (r, b, c)


def rank4(quad):
    a, b, c, d = (int(v) for v in quad)
    _check_sorted((a, b, c, d), 4)
    return comb(d, 4) + comb(c, 3) + comb(b, 2) + a


def num_triples(N):
    return N * (N - 1) * (N - 2) // 6


def is_k4minus(e, f, g):
    """True iff the three triple ranks are distinct and span exactly 4 vertices."""
    if e == f or f == g or e == g:
        return False
    return len(set(unrank(e)) | set(unrank(f)) | set(unrank(g))) == 4


def k4minus_completions(e, w):
    """The three pairs (f, g) completing e to a K4^- on the 4-set e + {w}."""
    t = unrank(e)
    if w in t:
        raise ValueError(f"vertex {w} already in triple {t}")
    if w < 0:
        raise ValueError(f"negative vertex {w}")
    quad = sorted(t + (w,))
    others = [rank(s) for s in combinations(quad, 3) if s != t]
    return [(f, g) for f, g in combinations(others, 2)]


@dataclass(frozen=True)
class K4MinusWitness:
    vertices: tuple
    edges: tuple

    def __post_init__(self):
        if len(self.vertices) != 4 or len(set(self.vertices)) != 4:
            raise ValueError("witness needs exactly four distinct vertices")
        if len(self.edges) != 3 or len(set(self.edges)) != 3:
            raise ValueError("witness needs exactly three distinct edges")
        vs = set(self.vertices)
        for e in self.edges:
            if not set(unrank(e)) <= vs:
                raise ValueError(f"edge {unrank(e)} not inside {self.vertices}")


# ---- vectorized helpers used by the engine, monitors and verifier ----

def rank_array(a, b, c):
    """Colex ranks of sorted triples given as integer arrays (a < b < c)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    return c * (c - 1) * (c - 2) // 6 + b * (b - 1) // 2 + a


def rank4_array(quads):
    q = np.asarray(quads, dtype=np.int64)
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return (d * (d - 1) * (d - 2) * (d - 3) // 24 + c * (c - 1) * (c - 2) // 6
            + b * (b - 1) // 2 + a)


@lru_cache(maxsize=8)
def triple_table(N):
    """(C(N,3), 3) int array: row r holds the sorted vertices of rank r."""
    c, b, a = np.array(list(combinations(range(N - 1, -1, -1), 3)), dtype=np.int64).T \
        if N >= 3 else (np.empty(0, np.int64),) * 3
    out = np.stack([a, b, c], axis=1)
    order = np.argsort(rank_array(a, b, c), kind="stable")
    out = out[order]
    out.setflags(write=False)
    return out


def quad_triples(quads):
    """Ranks of the four triples abc, abd, acd, bcd of sorted 4-sets, shape (K, 4)."""
    q = np.asarray(quads, dtype=np.int64)
    a, b, c, d = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    return np.stack([rank_array(a, b, c), rank_array(a, b, d),
                     rank_array(a, c, d), rank_array(b, c, d)], axis=1)


def quads_containing(ranks, N):
    """All distinct sorted 4-sets containing at least one of the given triples.

    Returns (quads, quad_ranks) with quads of shape (K, 4), sorted by rank.
    """
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.size == 0:
        return np.empty((0, 4), np.int64), np.empty(0, np.int64)
    verts = triple_table(N)[ranks]                       # (m, 3)
    w = np.arange(N, dtype=np.int64)
    m = len(ranks)
    cand = np.empty((m, N, 4), np.int64)
    cand[:, :, :3] = verts[:, None, :]
    cand[:, :, 3] = w[None, :]
    keep = (verts[:, :, None] != w[None, None, :]).all(axis=1)
    cand = np.sort(cand[keep], axis=1)
    r4 = rank4_array(cand)
    r4, idx = np.unique(r4, return_index=True)
    return cand[idx], r4


def vertex_cube(N, ranks):
    """Symmetric (N, N, N) boolean indicator of a triple set."""
    cube = np.zeros((N, N, N), dtype=bool)
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.size:
        v = triple_table(N)[ranks]
        a, b, c = v[:, 0], v[:, 1], v[:, 2]
        for x, y, z in ((a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)):
            cube[x, y, z] = True
    return cube
