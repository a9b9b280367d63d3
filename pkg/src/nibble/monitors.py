"""Tracked link variables R, S, T, U and the good events of the process.

Monitors read a state between steps and never modify it. Exact evaluation
uses dense (N, N, N) indicator cubes, so they are meant for desk-scale N.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from nibble import rng
from nibble.engine import KEPT, OPEN, REMOVED
from nibble.triples import rank, vertex_cube


def _distinct(*vs):
    if len(set(vs)) != len(vs):
        raise ValueError(f"vertices must be distinct: {vs}")


def _tri(u, v, w):
    return rank(sorted((u, v, w)))


@dataclass(frozen=True)
class LinkCounts:
    r: int
    s: int
    t: int


def link_counts(state, x, u, v):
    """Classify every w outside {x, u, v} by the states of xuw and xvw."""
    _distinct(x, u, v)
    st = state.states
    r = s = t = 0
    for w in range(state.N):
        if w in (x, u, v):
            continue
        a, b = st[_tri(x, u, w)], st[_tri(x, v, w)]
        oa, ob = a == OPEN, b == OPEN
        pa, pb = a in (KEPT, REMOVED), b in (KEPT, REMOVED)
        if oa and ob:
            r += 1
        elif (oa and pb) or (pa and ob):
            s += 1
        elif pa and pb:
            t += 1
    return LinkCounts(r, s, t)


def count_u(state, x, u, v, w):
    """|U_i(x,u,v,w)|: z with xuv, xuw, xuz open and xvz, uwz picked."""
    _distinct(x, u, v, w)
    st = state.states

    def is_open(*t):
        return st[_tri(*t)] == OPEN

    def picked(*t):
        return st[_tri(*t)] in (KEPT, REMOVED)

    if not (is_open(x, u, v) and is_open(x, u, w)):
        return 0
    return sum(1 for z in range(state.N)
               if z not in (x, u, v, w)
               and is_open(x, u, z) and picked(x, v, z) and picked(u, w, z))


def bipartite_link_count(H, x, A, B, N=None):
    """e_{H,x}(A,B): edges xab of H with a in A, b in B.

    ``H`` is a boolean vertex cube or an iterable of triple ranks (then N is
    required).
    """
    A, B = list(A), list(B)
    if set(A) & set(B):
        raise ValueError("A and B must be disjoint")
    if x in A or x in B:
        raise ValueError("x must lie outside A and B")
    if not isinstance(H, np.ndarray) or H.ndim != 3:
        if N is None:
            raise ValueError("N is required when H is given as ranks")
        H = vertex_cube(N, np.fromiter(H, np.int64))
    if not A or not B:
        return 0
    return int(H[x][np.ix_(A, B)].sum())


def bipartite_link_counts(cube, x, A, B):
    """Vectorized e_{H,x}(A,B) for k samples: x (k,), A and B (k, n)."""
    return cube[x[:, None, None], A[:, :, None], B[:, None, :]].sum(axis=(1, 2))


# -------------------------------------------------------------- events

@dataclass
class SamplePlan:
    seed: int = 0
    exact_cap: int = 120
    pairs: int = 2000
    quads: int = 2000
    sets: int = 200
    set_sizes: tuple | None = None   # default {ceil(s), n}
    min_set_size: int = 1


@dataclass
class EventVerdict:
    holds: bool
    worst_ratio: float
    witness: tuple | None = None
    checked: int = 0

    def to_dict(self):
        wr = self.worst_ratio
        return {"holds": self.holds,
                "worstRatio": wr if math.isfinite(wr) else str(wr),
                "witness": list(self.witness) if self.witness is not None else None,
                "checked": self.checked}


@dataclass
class EventCheckResult:
    step: int
    sampling_mode: str
    events: dict = field(default_factory=dict)

    @property
    def all_hold(self):
        return all(v.holds for v in self.events.values())

    def to_dict(self):
        return {"step": self.step, "samplingMode": self.sampling_mode,
                "events": {k: v.to_dict() for k, v in self.events.items()}}

    def csv_rows(self):
        for name, v in self.events.items():
            wit = "" if v.witness is None else " ".join(str(t) for t in v.witness)
            yield (self.step, name, v.worst_ratio, wit)


def _ratio(obs, thr):
    obs = np.asarray(obs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(thr > 0, obs / np.where(thr > 0, thr, 1), np.where(obs > 0, np.inf, 0.0))
    return r


def _verdict(ratios, witnesses):
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        return EventVerdict(True, 0.0, None, 0)
    k = int(np.argmax(ratios))
    wr = float(ratios[k])
    return EventVerdict(wr <= 1.0, wr, tuple(int(v) for v in witnesses[k]), int(ratios.size))


def link_count_matrices(O, P, x):
    """R, S, T as (N, N) matrices over pairs uv for centre x, from open and
    picked cubes. Entries with u or v equal to x are meaningless."""
    Ox, Px = O[x].astype(np.int64), P[x].astype(np.int64)
    R = Ox @ Ox.T
    S = Ox @ Px.T + Px @ Ox.T
    T = Px @ Px.T
    return R, S, T


def u_counts(O, P, x, u, v, w):
    """Vectorized |U_i(x,u,v,w)| for index arrays of equal length."""
    core = (O[x, u] & P[x, v] & P[u, w]).sum(axis=1)
    return core * O[x, u, v] * O[x, u, w]


def _cubes(state):
    N = state.N
    O = vertex_cube(N, state.open_ranks())
    P = vertex_cube(N, state.picked_ranks())
    G = vertex_cube(N, state.gamma_ranks(state.i)) if state.i > 0 else np.zeros_like(O)
    return O, P, G


def _random_sets(gen, k, N, sizes):
    """k rows of distinct vertices: first column x, then blocks of given sizes."""
    perm = np.argsort(gen.random((k, N)), axis=1)
    need = 1 + sum(sizes)
    return perm[:, :need]


def check_events(state, table, plan=None):
    plan = plan or SamplePlan()
    N, i = state.N, state.i
    n = table.n
    if 2 * n + 1 > N:
        raise ValueError(f"n = {n} too large for disjoint A, B, x in N = {N}")
    if i > table.I:
        raise ValueError("state is past the last step of the table")
    q, pi, sigma = table.q[i], table.pi[i], table.sigma
    L = math.log(N)
    gen = rng.CoinStreams(plan.seed).generator(rng.SAMPLING, i)
    O, P, G = _cubes(state)
    exact = N <= plan.exact_cap
    res = EventCheckResult(step=i, sampling_mode="exact" if exact else f"sampled({plan.pairs})")

    # N_i: pair degrees in O_i and Gamma_i
    xs, vs = np.nonzero(~np.eye(N, dtype=bool))
    ratios = _ratio(O.sum(axis=2)[xs, vs], q * N)
    if i > 0:
        ratios = np.maximum(ratios, _ratio(G.sum(axis=2)[xs, vs],
                                           2 * table.q[i - 1] * sigma * math.sqrt(N)))
    res.events["N"] = _verdict(ratios, np.stack([xs, vs], 1))

    # P_i: R, S, T for (x, {u, v})
    thr = (q * q * N, 2 * q * pi * math.sqrt(N), i * L**9)
    if exact:
        ratios, wits = [], []
        iu, iv = np.triu_indices(N, 1)
        for x in range(N):
            R, S, T = link_count_matrices(O, P, x)
            keep = (iu != x) & (iv != x)
            u, v = iu[keep], iv[keep]
            rr = np.maximum.reduce([_ratio(R[u, v], thr[0]), _ratio(S[u, v], thr[1]),
                                    _ratio(T[u, v], thr[2])])
            ratios.append(rr)
            wits.append(np.stack([np.full_like(u, x), u, v], 1))
        ratios, wits = np.concatenate(ratios), np.concatenate(wits)
    else:
        smp = _random_sets(gen, plan.pairs, N, (1, 1))
        x, u, v = smp[:, 0], smp[:, 1], smp[:, 2]
        R = (O[x, u] & O[x, v]).sum(1)
        S = ((O[x, u] & P[x, v]) | (P[x, u] & O[x, v])).sum(1)
        T = (P[x, u] & P[x, v]).sum(1)
        ratios = np.maximum.reduce([_ratio(R, thr[0]), _ratio(S, thr[1]), _ratio(T, thr[2])])
        wits = smp
    res.events["P"] = _verdict(ratios, wits)

    # P_i^+: U(x,u,v,w), sampled
    smp = _random_sets(gen, plan.quads, N, (1, 1, 1))
    x, u, v, w = smp.T
    U = u_counts(O, P, x, u, v, w)
    res.events["P+"] = _verdict(_ratio(U, i * L**9), smp)

    # set-based events
    sizes = plan.set_sizes
    if sizes is None:
        sizes = sorted({max(1, math.ceil(table.s)), n})
    sizes = [s for s in sizes if s >= plan.min_set_size and 2 * s + 1 <= N]

    # N_i^+: |N_{Gamma_i}(vx) ∩ A| for random A
    ratios, wits = [], []
    for s in sizes:
        smp = _random_sets(gen, plan.sets, N, (1, s))
        x, v, A = smp[:, 0], smp[:, 1], smp[:, 2:]
        cnt = G[x[:, None], v[:, None], A].sum(1)
        ratios.append(_ratio(cnt, table.p * s * (1 + N ** (0.25 + table.beta))))
        wits.append(np.stack([x, v, np.full_like(x, s)], 1))
    res.events["N+"] = _verdict(np.concatenate(ratios) if ratios else [],
                                np.concatenate(wits) if wits else [])

    # Q_i^+ (sizes >= s) and Q_i (size n)
    ratios, wits = [], []
    for s in sizes:
        smp = _random_sets(gen, plan.sets, N, (s, s))
        x, A, B = smp[:, 0], smp[:, 1:s + 1], smp[:, s + 1:]
        cnt = bipartite_link_counts(O, x, A, B)
        ratios.append(_ratio(cnt, q * s * s))
        wits.append(np.stack([x, np.full_like(x, s), cnt], 1))
        if s == n:
            lower = table.tau[i] * q * n * n
            q_ratio = np.maximum(_ratio(cnt, q * n * n), _ratio(np.full(len(cnt), lower), cnt))
            res.events["Q"] = _verdict(q_ratio, wits[-1])
    res.events["Q+"] = _verdict(np.concatenate(ratios) if ratios else [],
                                np.concatenate(wits) if wits else [])
    if "Q" not in res.events:
        res.events["Q"] = EventVerdict(True, 0.0, None, 0)
    return res


def plan_for(config):
    scale = 5 if config.monitor_level == "full" else 1
    return SamplePlan(seed=config.seed, exact_cap=config.exact_cap,
                      pairs=config.sample_pairs * scale, quads=config.sample_quads * scale,
                      sets=config.sample_sets * scale, min_set_size=config.min_set_size)


def monitor_record(state, table, config):
    """Manifest record for one snapshot (used as the run() monitor hook)."""
    return check_events(state, table, plan_for(config)).to_dict()
