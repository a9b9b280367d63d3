"""Certification of constructed hypergraphs and intermediate states."""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from nibble import rng
from nibble.monitors import bipartite_link_counts
from nibble.triples import rank, triple_table, unrank, vertex_cube

K4_MINUS_IN_H = "K4MinusInH"
OPEN_EDGE_CLOSABLE = "OpenEdgeClosable"
STAR_IN_COMPLEMENT = "StarInComplement"


@dataclass(frozen=True)
class Violation:
    kind: str
    witness: tuple

    def to_dict(self):
        return {"kind": self.kind, "witness": _plain(self.witness)}


def _plain(obj):
    if isinstance(obj, (tuple, list)):
        return [_plain(o) for o in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def thread_count():
    raw = os.environ.get("NIBBLE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"NIBBLE_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


# ---------------------------------------------------- K4^- freeness

def _scan_from(cube, a):
    sub = cube[a, a + 1:, a + 1:].astype(np.uint8)
    rest = cube[a + 1:, a + 1:, a + 1:]
    cnt = sub[:, :, None] + sub[:, None, :] + sub[None, :, :] + rest
    hits = np.argwhere(cnt >= 3)
    if len(hits) == 0:
        return None
    hits = hits[(hits[:, 0] < hits[:, 1]) & (hits[:, 1] < hits[:, 2])]
    b, c, d = (int(v) + a + 1 for v in hits[0])
    return (a, b, c, d)


def assert_k4minus_free(H, N):
    """Scan all C(N,4) 4-sets; return a Violation for the first one holding
    three or more edges of H, else None."""
    cube = vertex_cube(N, np.fromiter(H, np.int64) if not isinstance(H, np.ndarray) else H)
    with ThreadPoolExecutor(max_workers=thread_count()) as ex:
        found = list(ex.map(lambda a: _scan_from(cube, a), range(max(N - 3, 0))))
    for quad in found:
        if quad is not None:
            edges = tuple(rank(t) for t in combinations(quad, 3) if cube[t])
            return Violation(K4_MINUS_IN_H, (quad, edges))
    return None


def k4minus_witness_join(H):
    """Independent detector: join edge pairs sharing two vertices."""
    H = set(int(h) for h in H)
    by_pair = {}
    for e in H:
        t = unrank(e)
        for pr in combinations(t, 2):
            by_pair.setdefault(pr, []).append(e)
    for pr, es in sorted(by_pair.items()):
        for e, f in combinations(sorted(es), 2):
            quad = tuple(sorted(set(unrank(e)) | set(unrank(f))))
            for g in (rank(t) for t in combinations(quad, 3)):
                if g != e and g != f and g in H:
                    edges = tuple(sorted({e, f, g}))
                    return Violation(K4_MINUS_IN_H, (quad, edges))
    return None


# ------------------------------------------------------ open invariant

def open_invariant_check(state, sample_size=100_000, seed=0, full_limit=100_000,
                         chunk=20_000):
    """Open edges that could be closed by two picked edges (should be none).

    All open edges are checked when there are at most ``full_limit`` of them,
    otherwise ``sample_size`` of them chosen at random.
    """
    opens = state.open_ranks()
    if len(opens) > full_limit:
        gen = rng.CoinStreams(seed).generator(rng.SAMPLING, state.i)
        opens = np.sort(gen.choice(opens, size=min(sample_size, len(opens)), replace=False))
    P = vertex_cube(state.N, state.picked_ranks())
    table = triple_table(state.N)
    out = []
    for lo in range(0, len(opens), chunk):
        ranks = opens[lo:lo + chunk]
        v = table[ranks]
        a, b, c = v[:, 0], v[:, 1], v[:, 2]
        pab, pac, pbc = P[a, b], P[a, c], P[b, c]    # (k, N) over the fourth vertex
        hits = np.argwhere(pab.astype(np.uint8) + pac + pbc >= 2)
        for r, w in hits.tolist():
            quad = sorted((int(a[r]), int(b[r]), int(c[r]), w))
            e = int(ranks[r])
            f, g = [rank(t) for t in combinations(quad, 3)
                    if rank(t) != e and P[t]][:2]
            out.append(Violation(OPEN_EDGE_CLOSABLE, (e, f, g)))
    return out


# ------------------------------------------------- independent sets

def _clique_cover(cand, adj):
    """Greedy clique cover size of the candidate bitmask (upper bound on alpha)."""
    k = 0
    while cand:
        v = (cand & -cand).bit_length() - 1
        members = 1 << v
        rest = cand & adj[v]
        while rest:
            u = (rest & -rest).bit_length() - 1
            members |= 1 << u
            rest &= adj[u]
        cand &= ~members
        k += 1
    return k


def max_independent_set(n, edges, target=None):
    """Maximum independent set by branch and bound.

    Bound: greedy clique cover of the remaining candidates. Degree <= 1
    vertices are taken without branching. If ``target`` is given, the search
    stops once an independent set of that size is found.
    """
    adj = [0] * n
    for u, v in edges:
        if u == v:
            continue
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    best = [0]
    best_set = [0]
    goal = target if target is not None else n + 1

    def rec(cand, chosen, size):
        while True:
            changed = False
            c = cand
            while c:
                low = c & -c
                v = low.bit_length() - 1
                c ^= low
                if not cand >> v & 1:
                    continue
                deg = bin(adj[v] & cand).count("1")
                if deg <= 1:
                    chosen |= 1 << v
                    size += 1
                    cand &= ~(adj[v] | (1 << v))
                    changed = True
            if not changed:
                break
        if size > best[0]:
            best[0], best_set[0] = size, chosen
        if not cand or best[0] >= goal:
            return
        if size + _clique_cover(cand, adj) <= best[0]:
            return
        v = max(_bits(cand), key=lambda u: bin(adj[u] & cand).count("1"))
        rec(cand & ~(adj[v] | (1 << v)), chosen | (1 << v), size + 1)
        if best[0] >= goal:
            return
        rec(cand & ~(1 << v), chosen, size)

    rec((1 << n) - 1, 0, 0)
    return sorted(_bits(best_set[0]))


def _bits(mask):
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


# ------------------------------------------------------------ stars

EXACT_STAR_CAP = 60


def _cube_of(H, N):
    if isinstance(H, np.ndarray) and H.ndim == 3:
        return H
    return vertex_cube(N, np.fromiter(H, np.int64) if not isinstance(H, np.ndarray) else H)


def sample_triples(N, n, k, seed):
    gen = rng.CoinStreams(seed).generator(rng.SAMPLING, n)
    perm = np.argsort(gen.random((k, N)), axis=1)[:, :2 * n + 1]
    return perm[:, 0], perm[:, 1:n + 1], perm[:, n + 1:]


def find_star_center(H, N, n, mode="exact", k=10_000, seed=0, cap=EXACT_STAR_CAP):
    """Look for a copy of S_n in the complement of H.

    exact: some x whose link graph has an independent set of size n - 1.
    sampled: k random (x, A, B) with |A| = |B| = n and e_{H,x}(A,B) = 0.
    """
    if n > N:
        raise ValueError(f"n = {n} exceeds N = {N}")
    cube = _cube_of(H, N)
    if mode == "exact":
        if N > cap:
            raise ValueError(f"exact star search needs N <= {cap}")
        for x in range(N):
            others = [v for v in range(N) if v != x]
            pos = {v: j for j, v in enumerate(others)}
            us, vs = np.nonzero(np.triu(cube[x], 1))
            edges = [(pos[u], pos[v]) for u, v in zip(us.tolist(), vs.tolist())]
            ind = max_independent_set(len(others), edges, target=n - 1)
            if len(ind) >= n - 1:
                return Violation(STAR_IN_COMPLEMENT, (x, tuple(others[j] for j in ind[:n - 1])))
        return None
    if mode == "sampled":
        if 2 * n + 1 > N:
            raise ValueError(f"n = {n} too large for disjoint A, B, x in N = {N}")
        x, A, B = sample_triples(N, n, k, seed)
        cnt = bipartite_link_counts(cube, x, A, B)
        zero = np.flatnonzero(cnt == 0)
        if len(zero):
            j = int(zero[0])
            return Violation(STAR_IN_COMPLEMENT,
                             (int(x[j]), tuple(A[j].tolist()), tuple(B[j].tolist())))
        return None
    raise ValueError(f"unknown mode {mode!r}")


def calibrate_star_size(H, N, k=10_000, seed=0):
    """Smallest n for which all k sampled (x, A, B) hold an edge xab.

    Returns None if no n with 2n + 1 <= N qualifies.
    """
    cube = _cube_of(H, N)
    for n in range(1, (N - 1) // 2 + 1):
        if find_star_center(cube, N, n, mode="sampled", k=k, seed=seed) is None:
            return n
    return None


def star_statistic(H, N, n, table, k=10_000, seed=0):
    """Sampled e_{H,x}(A,B) / (rho n^2): mean, min, max and zero count."""
    cube = _cube_of(H, N)
    x, A, B = sample_triples(N, n, k, seed)
    cnt = bipartite_link_counts(cube, x, A, B)
    ratio = cnt / (table.rho * n * n)
    return {"n": n, "samples": k, "zeros": int((cnt == 0).sum()),
            "mean_ratio": float(ratio.mean()), "min_ratio": float(ratio.min()),
            "max_ratio": float(ratio.max())}


def certificate(H, N, n, state=None, mode="sampled", k=10_000, seed=0):
    """Certificate dictionary for the verify command."""
    k4 = assert_k4minus_free(H, N)
    witnesses = [k4.to_dict()] if k4 else []
    cert = {"N": N, "edges": int(len(H)), "k4minusFree": k4 is None}
    if state is not None:
        viol = open_invariant_check(state)
        cert["openInvariant"] = not viol
        witnesses += [v.to_dict() for v in viol[:10]]
    else:
        cert["openInvariant"] = None
    star = find_star_center(H, N, n, mode=mode, k=k, seed=seed)
    cert["starProbe"] = {"mode": mode, "n": n, "samples": k if mode == "sampled" else None,
                         "starInComplement": star is not None}
    if star:
        witnesses.append(star.to_dict())
    cert["witnesses"] = witnesses
    return cert
