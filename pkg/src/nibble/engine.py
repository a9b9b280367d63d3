"""The nibble process.

State is one int8 code per triple rank. Picked edges (E_i) are KEPT or
REMOVED; kept edges form H_i. Closed edges record which rule closed them.
All per-step scans work on the 4-sets that contain a picked or a freshly
sampled triple, since every K4^- lives inside a single 4-set.
"""

import hashlib
import logging
import subprocess
from dataclasses import dataclass, field
from enum import IntEnum
from itertools import combinations
from pathlib import Path

import numpy as np

from nibble import rng
from nibble.config import RunConfig
from nibble.triples import (k4minus_completions, num_triples, quad_triples,
                            quads_containing, triple_table)
from nibble.trajectory import build_tables, p_hat_array, pow1m

log = logging.getLogger(__name__)


class EdgeState(IntEnum):
    OPEN = 0
    KEPT = 1        # picked, in H
    REMOVED = 2     # picked, dropped by D
    CLOSED_C1 = 3
    CLOSED_C2 = 4
    CLOSED_Y = 5

    @property
    def picked(self):
        return self in (EdgeState.KEPT, EdgeState.REMOVED)


OPEN, KEPT, REMOVED = EdgeState.OPEN, EdgeState.KEPT, EdgeState.REMOVED


@dataclass
class ProcessState:
    N: int
    i: int
    states: np.ndarray
    stamp: np.ndarray   # step at which an edge was picked or closed; 0 while open

    @property
    def M(self):
        return len(self.states)

    @property
    def open_count(self):
        return int(np.count_nonzero(self.states == OPEN))

    def open_mask(self):
        return self.states == OPEN

    def picked_mask(self):
        return (self.states == KEPT) | (self.states == REMOVED)

    def kept_mask(self):
        return self.states == KEPT

    def open_ranks(self):
        return np.flatnonzero(self.states == OPEN)

    def picked_ranks(self):
        return np.flatnonzero(self.picked_mask())

    def kept_ranks(self):
        return np.flatnonzero(self.states == KEPT)

    def gamma_ranks(self, j):
        """Edges that entered Gamma_j."""
        return np.flatnonzero(self.picked_mask() & (self.stamp == j))

    def edge_state(self, r):
        return EdgeState(int(self.states[r]))

    def copy(self):
        return ProcessState(self.N, self.i, self.states.copy(), self.stamp.copy())


def init(N):
    if N < 4:
        raise ValueError(f"N must be at least 4, got {N}")
    M = num_triples(N)
    return ProcessState(int(N), 0, np.zeros(M, np.int8), np.zeros(M, np.int16))


def from_sets(N, kept=(), removed=(), closed=()):
    """Hand-built state: everything not listed stays open."""
    st = init(N)
    st.states[list(kept)] = KEPT
    st.states[list(removed)] = REMOVED
    st.states[list(closed)] = EdgeState.CLOSED_Y
    return st


# ------------------------------------------------------------ step pieces

def _check_step(state, table):
    if state.i >= table.I:
        raise ValueError(f"step index {state.i} >= I = {table.I}")


def sample_gamma(state, table, streams):
    _check_step(state, table)
    u = streams.uniforms(rng.GAMMA, state.i, state.M)
    return np.flatnonzero((state.states == OPEN) & (u < table.p))


@dataclass
class BadSets:
    b2: set = field(default_factory=set)
    b3: set = field(default_factory=set)

    def ordered(self):
        """Greedy order: B2 first, then B3, each by sorted rank tuples."""
        return sorted(self.b2) + sorted(self.b3)


def _mask(M, ranks):
    m = np.zeros(M, bool)
    m[np.asarray(ranks, dtype=np.int64)] = True
    return m


def compute_bad_sets(state, gamma):
    gmask = _mask(state.M, gamma)
    quads, _ = quads_containing(gamma, state.N)
    bad = BadSets()
    if len(quads) == 0:
        return bad
    T = quad_triples(quads)
    inG = gmask[T]
    nG = inG.sum(axis=1)
    nK = (state.states[T] == KEPT).sum(axis=1)
    for row in np.flatnonzero(nG >= 2):
        g_edges = sorted(int(t) for t in T[row][inG[row]])
        if nK[row] >= 1:
            bad.b2.update(combinations(g_edges, 2))
        if nG[row] >= 3:
            bad.b3.update(combinations(g_edges, 3))
    return bad


def select_disjoint_maximal(bad):
    """Greedy maximal family of pairwise edge-disjoint members.

    ``bad`` is a BadSets (ordered B2 then B3) or any sequence of members,
    taken in the given order.
    """
    members = bad.ordered() if isinstance(bad, BadSets) else list(bad)
    used = set()
    chosen = []
    for m in members:
        if used.isdisjoint(m):
            chosen.append(tuple(m))
            used.update(m)
    return chosen


def apply_removals(state, gamma, D):
    dropped = {e for s in D for e in s}
    gamma = np.asarray(gamma, dtype=np.int64)
    state.states[gamma] = KEPT
    if dropped:
        state.states[np.fromiter(dropped, np.int64)] = REMOVED
    state.stamp[gamma] = state.i + 1
    return state


def s_hat(state, e, members=False):
    """|S_hat_i(e)|: open f with some picked g making efg a K4^-."""
    if state.states[e] != OPEN:
        raise ValueError(f"edge {e} is not open")
    st = state.states
    found = set()
    a, b, c = (int(v) for v in triple_table(state.N)[e])
    for w in range(state.N):
        if w in (a, b, c):
            continue
        for f, g in k4minus_completions(e, w):
            for x, y in ((f, g), (g, f)):
                if st[x] == OPEN and st[y] in (KEPT, REMOVED):
                    found.add(x)
    return (len(found), found) if members else len(found)


def s_hat_counts(state):
    """|S_hat_i(e)| for every rank (zero for non-open edges)."""
    quads, _ = quads_containing(state.picked_ranks(), state.N)
    counts = np.zeros(state.M, np.int64)
    if len(quads) == 0:
        return counts
    T = quad_triples(quads)
    op = state.states[T] == OPEN
    nO = op.sum(axis=1)
    w = np.broadcast_to((nO - 1)[:, None], T.shape)[op]
    counts += np.bincount(T[op], weights=w, minlength=state.M).astype(np.int64)
    return counts


def closure_sets(state, gamma):
    """(C1, C2) against the pre-step state; both are sorted rank arrays."""
    gmask = _mask(state.M, gamma)
    quads, _ = quads_containing(gamma, state.N)
    if len(quads) == 0:
        empty = np.empty(0, np.int64)
        return empty, empty
    T = quad_triples(quads)
    st = state.states[T]
    op = st == OPEN
    inG = gmask[T]
    nG = inG.sum(axis=1, keepdims=True)
    others = nG - inG
    nP = ((st == KEPT) | (st == REMOVED)).sum(axis=1, keepdims=True)
    c1 = np.unique(T[op & (others >= 1) & (nP >= 1)])
    c2 = np.unique(T[op & (others >= 2)])
    return c1, c2


def sample_stabilizer(state, table, streams, counts=None):
    _check_step(state, table)
    if counts is None:
        counts = s_hat_counts(state)
    u = streams.uniforms(rng.STABILIZER, state.i, state.M)
    op = state.states == OPEN
    ph = p_hat_array(counts[op], state.i, table)
    ranks = np.flatnonzero(op)
    return ranks[u[op] < ph]


@dataclass
class StepReport:
    i: int
    gamma_size: int
    b2_size: int
    b3_size: int
    d_size: int
    removed_from_h: int
    c1_size: int
    c2_size: int
    y_size: int
    open_before: int
    open_after: int
    predicted_open_fraction: float
    actual_open_fraction: float
    predicted_removed_fraction: float
    actual_removed_fraction: float

    _keys = {
        "i": "i", "gamma_size": "gammaSize", "b2_size": "b2Size", "b3_size": "b3Size",
        "d_size": "dSize", "removed_from_h": "removedFromH", "c1_size": "c1Size",
        "c2_size": "c2Size", "y_size": "ySize", "open_before": "openBefore",
        "open_after": "openAfter", "predicted_open_fraction": "predictedOpenFraction",
        "actual_open_fraction": "actualOpenFraction",
        "predicted_removed_fraction": "predictedRemovedFraction",
        "actual_removed_fraction": "actualRemovedFraction",
    }

    def to_dict(self):
        return {v: getattr(self, k) for k, v in self._keys.items()}


def predicted_removed_fraction(i, table):
    """Removal probability of an open edge when p_hat tops |S_hat| up to the threshold."""
    return 1 - pow1m(table.p, 1 + table.threshold[i])


def step(state, table, streams):
    """Advance one round in place; returns (state, StepReport)."""
    _check_step(state, table)
    i = state.i
    before = state.copy()
    open_before = before.open_count
    gamma = sample_gamma(before, table, streams)
    bad = compute_bad_sets(before, gamma)
    D = select_disjoint_maximal(bad)
    apply_removals(state, gamma, D)
    c1, c2 = closure_sets(before, gamma)
    counts = s_hat_counts(before)
    y = sample_stabilizer(before, table, streams, counts)

    # simultaneous removal from O_i; picked wins, then C1 over C2 over Y
    for ranks, code in ((y, EdgeState.CLOSED_Y), (c2, EdgeState.CLOSED_C2),
                        (c1, EdgeState.CLOSED_C1)):
        sel = ranks[~np.isin(ranks, gamma)]
        state.states[sel] = code
        state.stamp[sel] = i + 1
    state.i = i + 1
    open_after = state.open_count
    M = state.M
    report = StepReport(
        i=i, gamma_size=len(gamma), b2_size=len(bad.b2), b3_size=len(bad.b3),
        d_size=len(D), removed_from_h=sum(len(s) for s in D),
        c1_size=len(c1), c2_size=len(c2), y_size=len(y),
        open_before=open_before, open_after=open_after,
        predicted_open_fraction=float(table.q[i + 1]),
        actual_open_fraction=open_after / M,
        predicted_removed_fraction=float(predicted_removed_fraction(i, table)),
        actual_removed_fraction=(open_before - open_after) / open_before if open_before else 0.0,
    )
    return state, report


# ------------------------------------------------------------ full runs

def export_text(N, ranks):
    verts = triple_table(N)[np.sort(np.asarray(ranks, dtype=np.int64))]
    lines = [f"# nibble hypergraph N={N} edges={len(verts)}"]
    lines += [f"{a} {b} {c}" for a, b, c in verts.tolist()]
    return "\n".join(lines) + "\n"


def export_binary(ranks):
    """Little-endian u32 edge count followed by the sorted u32 ranks."""
    r = np.sort(np.asarray(ranks, dtype=np.int64))
    if r.size and r[-1] >= 2**32:
        raise ValueError("rank does not fit in u32")
    return np.array([len(r)], "<u4").tobytes() + r.astype("<u4").tobytes()


def h_hash(ranks):
    return hashlib.sha256(export_binary(ranks)).hexdigest()


def build_info():
    root = Path(__file__).resolve().parents[2]
    try:
        out = subprocess.run(["git", "-C", str(root), "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        desc = out.stdout.strip() if out.returncode == 0 else None
    except (OSError, subprocess.SubprocessError):
        desc = None
    from nibble import __version__
    return {"version": __version__, "git": desc}


@dataclass
class RunResult:
    state: ProcessState
    table: object
    reports: list
    monitors: list
    manifest: dict

    @property
    def H(self):
        return self.state.kept_ranks()


def run(config, monitor="auto"):
    """Run I steps (or config.steps_override) and build the manifest.

    ``monitor(state, table, config)`` is called on the initial state and after
    each step; its records go into the manifest. The default picks the event
    monitors unless config.monitor_level is "off"; pass None to disable.
    """
    if isinstance(config, dict):
        config = RunConfig.from_dict(config)
    if monitor == "auto":
        monitor = None
        if config.monitor_level != "off":
            from nibble.monitors import monitor_record
            monitor = monitor_record
    table = build_tables(config.N, config.beta, config.delta, n=config.set_size,
                         steps=config.steps_override)
    streams = rng.CoinStreams(config.seed)
    state = init(config.N)
    reports, records = [], []
    early = False
    if monitor is not None:
        records.append(monitor(state, table, config))
    while state.i < table.I:
        if state.open_count == 0:
            early = True
            log.warning("no open edges left at step %d of %d", state.i, table.I)
            break
        state, rep = step(state, table, streams)
        reports.append(rep)
        if monitor is not None:
            records.append(monitor(state, table, config))
    H = state.kept_ranks()
    manifest = {
        "N": config.N, "beta": config.beta, "delta": config.delta, "C": config.bigC,
        "seed": config.seed, "I": table.I, "n": table.n,
        "steps": [r.to_dict() for r in reports],
        "terminated_early": early,
        "h_size": int(len(H)),
        "h_hash": h_hash(H),
        # out_dir is where artifacts land, not part of the experiment
        "config": {k: v for k, v in config.to_dict().items() if k != "out_dir"},
        "build": build_info(),
    }
    if records:
        manifest["monitors"] = records
    return RunResult(state, table, reports, records, manifest)
