"""Deterministic trajectory of the nibble process.

Psi solves Psi' = exp(-3 Psi^2), Psi(0) = 0. The open-edge density is
tracked by q_i = Psi'(i sigma) and the scaled picked-edge density by
pi_i = sigma + sum_{j<i} sigma q_j.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DEFAULT_STEP = 1e-4
X_GRID_MAX = 1e6


def _rhs(t, y):
    # d Psi / dt with t = log(1 + x)
    return math.exp(t - 3.0 * y * y)


@lru_cache(maxsize=4)
def _solution(h, t_max):
    """RK4 on Psi as a function of t = log(1 + x); fixed step h in t."""
    n = int(math.ceil(t_max / h))
    ys = np.empty(n + 1)
    y = 0.0
    ys[0] = y
    t = 0.0
    for k in range(n):
        k1 = _rhs(t, y)
        k2 = _rhs(t + h / 2, y + h / 2 * k1)
        k3 = _rhs(t + h / 2, y + h / 2 * k2)
        k4 = _rhs(t + h, y + h * k3)
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (k + 1) * h
        ys[k + 1] = y
    ys.setflags(write=False)
    return ys


def _step_for(tol):
    # RK4 error scales as h^4; the default step comfortably meets tol >= 1e-9
    if tol >= 1e-9:
        return DEFAULT_STEP
    return DEFAULT_STEP * (tol / 1e-9) ** 0.25


def psi(x, tol=1e-8):
    """Psi(x) from the ODE, via cached RK4 grid and cubic Hermite interpolation.

    Accepts a scalar or array of nonnegative x.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)):
        raise ValueError("x must be finite")
    if np.any(xa < 0):
        raise ValueError("x must be nonnegative")
    h = _step_for(tol)
    t = np.log1p(xa)
    t_max = max(math.log1p(X_GRID_MAX), float(np.max(t, initial=0.0)))
    t_max = math.ceil(t_max)  # stable cache key
    ys = _solution(h, float(t_max))
    k = np.minimum((t / h).astype(np.int64), len(ys) - 2)
    t0 = k * h
    y0, y1 = ys[k], ys[k + 1]
    d0 = np.exp(t0 - 3 * y0 * y0)
    d1 = np.exp(t0 + h - 3 * y1 * y1)
    s = (t - t0) / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    out = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    out = np.where(xa == 0, 0.0, out)
    return float(out) if np.ndim(x) == 0 else out


def psi_bounds(x):
    """Lower and upper envelopes sqrt(log(sqrt3 x)/3) -/+ 1/sqrt3, valid for x >= e."""
    mid = np.sqrt(np.log(math.sqrt(3) * np.asarray(x, dtype=float)) / 3)
    r = 1 / math.sqrt(3)
    return mid - r, mid + r


def default_n(N, bigC=1.0):
    return int(math.ceil(bigC * math.sqrt(N * math.log(N))))


@dataclass(frozen=True)
class TrajectoryTable:
    N: int
    beta: float
    delta: float
    n: int
    sigma: float
    p: float
    I: int
    q: np.ndarray
    pi: np.ndarray
    rho: float
    s: float
    tau: np.ndarray
    threshold: np.ndarray   # 6 sqrt(N) q_i (pi_i + sqrt(sigma))

    def to_dict(self):
        return {
            "N": self.N, "beta": self.beta, "delta": self.delta, "n": self.n,
            "sigma": self.sigma, "p": self.p, "I": self.I, "rho": self.rho,
            "s": self.s,
            "q": self.q.tolist(), "pi": self.pi.tolist(), "tau": self.tau.tolist(),
            "threshold": self.threshold.tolist(),
        }


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def build_tables(N, beta, delta=0.5, n=None, steps=None):
    """Trajectory table for N vertices.

    ``steps`` overrides I = ceil(N^beta) (used for desk-scale runs);
    ``n`` defaults to ceil(sqrt(N log N)).
    """
    if not isinstance(N, (int, np.integer)) or N < 3:
        raise ValueError(f"N must be an integer >= 3, got {N!r}")
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    N = int(N)
    L = math.log(N)
    sigma = 1 / L**2
    p = sigma / math.sqrt(N)
    I = int(math.ceil(N**beta)) if steps is None else int(steps)
    if I < 0:
        raise ValueError("steps must be nonnegative")
    if n is None:
        n = default_n(N)
    q = np.exp(-3 * psi(np.arange(I + 1) * sigma) ** 2)
    q[0] = 1.0
    pi = np.empty(I + 1)
    pi[0] = sigma
    for i in range(I):
        pi[i + 1] = pi[i] + sigma * q[i]
    tau = 1 - delta * pi / (2 * pi[I])
    return TrajectoryTable(
        N=N, beta=float(beta), delta=float(delta), n=int(n), sigma=sigma, p=p, I=I,
        q=_frozen(q), pi=_frozen(pi),
        rho=math.sqrt(beta * L / (3 * N)),
        s=n * sigma**4 * q[I] ** 2,
        tau=_frozen(tau),
        threshold=_frozen(6 * math.sqrt(N) * q * (pi + math.sqrt(sigma))),
    )


def pow1m(p, k):
    """(1 - p)^k for k >= 0 without underflow trouble."""
    if p == 0 or k == 0:
        return 1.0
    return math.exp(k * math.log1p(-p))


def p_hat(s_hat_count, i, table):
    """Stabilization probability for an open edge with |S_hat| = s_hat_count at step i."""
    expo = max(table.threshold[i] - s_hat_count, 0.0)
    return -math.expm1(expo * math.log1p(-table.p)) if table.p > 0 and expo > 0 else 0.0


def p_hat_array(counts, i, table):
    expo = np.maximum(table.threshold[i] - np.asarray(counts, dtype=float), 0.0)
    if table.p == 0:
        return np.zeros_like(expo)
    return -np.expm1(expo * math.log1p(-table.p))


# ---------------------------------------------------------------- bounds

@dataclass
class Check:
    passed: bool
    worst_margin: float     # min over checked points of (allowed - observed); >= 0 passes
    location: object = None  # (i,) or (x,) of the tightest point
    checked: int = 0

    def to_dict(self):
        loc = self.location
        if isinstance(loc, tuple):
            loc = list(loc)
        return {"passed": self.passed, "worst_margin": self.worst_margin,
                "location": loc, "checked": self.checked}


@dataclass
class BoundReport:
    checks: dict = field(default_factory=dict)

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks.values())

    def failed(self):
        return [k for k, c in self.checks.items() if not c.passed]

    def to_dict(self):
        return {"all_passed": self.all_passed,
                "checks": {k: c.to_dict() for k, c in self.checks.items()}}


def _worst(margins, locations, tol=0.0):
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return Check(True, math.inf, None, 0)
    k = int(np.argmin(margins))
    m = float(margins[k])
    ok = m >= -tol
    return Check(bool(ok), m, locations[k], int(margins.size))


def verify_bounds(table, x_grid=None):
    """Evaluate every inequality on q, pi and Psi for the given table.

    Items (a)-(i); failures are reported in the result, never raised.
    """
    if x_grid is None:
        x_grid = np.geomspace(math.e, X_GRID_MAX, 400)
    x_grid = np.asarray(x_grid, dtype=float)
    q, pi, sigma, I = np.asarray(table.q), np.asarray(table.pi), table.sigma, table.I
    idx = np.arange(I + 1)
    locs = [(int(i),) for i in idx]
    r = BoundReport()

    # (a) Psi envelope for x >= e
    ps = psi(x_grid)
    lo, hi = psi_bounds(x_grid)
    r.checks["a_psi_envelope"] = _worst(np.minimum(ps - lo, hi - ps),
                                        [(float(x),) for x in x_grid])

    # (b) 0 <= q_i <= 1
    r.checks["b_q_unit_interval"] = _worst(np.minimum(q, 1 - q), locs)

    # (c) pi recursion (exact up to rounding) and pi_i - Psi(i sigma) in [sigma, 2 sigma]
    eq_tol = 1e-12 * max(I, 1)
    if I > 0:
        rec = eq_tol - np.abs(np.diff(pi) - sigma * q[:-1])
        rec_check = _worst(rec, locs[:-1])
    else:
        rec_check = Check(True, eq_tol, None, 0)
    gap = pi - psi(idx * sigma)
    gap_check = _worst(np.minimum(gap - sigma, 2 * sigma - gap), locs)
    r.checks["c_pi_recursion"] = rec_check
    r.checks["c_pi_minus_psi"] = gap_check

    # (d) sqrt(sigma) pi_i <= 1
    r.checks["d_sqrt_sigma_pi"] = _worst(1 - math.sqrt(sigma) * pi, locs)

    # (e) q_i pi_i^k <= 1, k = 1, 2
    r.checks["e_q_pi_k"] = _worst(np.minimum(1 - q * pi, 1 - q * pi**2), locs)

    # (f) |(q_i - q_{i+1}) - 6 sigma q_i^2 pi_i| <= 16 sigma^2 q_i^2
    # (g) q_i >= exp(-3 (upper Psi envelope at i sigma)^2) where i sigma >= e
    # (i) 0 <= q_i - q_{i+1} <= 12 sigma min{q_i, q_{i+1}, q_i pi_i}
    if I > 0:
        dq = q[:-1] - q[1:]
        qi, qn, pii = q[:-1], q[1:], pi[:-1]
        r.checks["f_q_step_estimate"] = _worst(
            16 * sigma**2 * qi**2 - np.abs(dq - 6 * sigma * qi**2 * pii), locs[:-1])
        cap = 12 * sigma * np.minimum(np.minimum(qi, qn), qi * pii)
        r.checks["i_q_step_range"] = _worst(np.minimum(dq, cap - dq), locs[:-1])
    else:
        r.checks["f_q_step_estimate"] = Check(True, math.inf, None, 0)
        r.checks["i_q_step_range"] = Check(True, math.inf, None, 0)

    far = idx * sigma >= math.e
    if far.any():
        _, up = psi_bounds(idx[far] * sigma)
        r.checks["g_q_lower"] = _worst(q[far] - np.exp(-3 * up**2),
                                       [loc for loc, f in zip(locs, far) if f])
    else:
        r.checks["g_q_lower"] = Check(True, math.inf, None, 0)

    # (h) p_hat <= q_i, worst case |S_hat| = 0
    ph = np.array([p_hat(0, int(i), table) for i in idx])
    r.checks["h_p_hat_below_q"] = _worst(q - ph, locs)
    return r
