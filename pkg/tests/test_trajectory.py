import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nibble.trajectory import (build_tables, p_hat, p_hat_array, psi, psi_bounds,
                               verify_bounds)

from oracles import implicit_integral, psi_bisection


def test_psi_at_zero_and_slope():
    assert psi(0.0) == 0.0
    h = 1e-6
    assert abs((psi(h) - psi(0.0)) / h - 1) < 1e-4


def test_psi_envelope_at_10():
    lo, hi = psi_bounds(10.0)
    assert lo <= psi(10.0) <= hi


def test_psi_one_matches_bisection_oracle():
    ref = psi_bisection(1.0, width=1e-10)
    assert abs(psi(1.0) - ref) < 1e-8


@pytest.mark.parametrize("x", [0.05, 0.5, 3.0, 25.0, 100.0])
def test_psi_residual_pointwise(x):
    assert abs(implicit_integral(psi(x)) - x) <= 1e-6


def test_psi_rejects_bad_input():
    for bad in (-1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            psi(bad)
    with pytest.raises(ValueError):
        psi(1.0, tol=0)


def test_psi_strictly_increasing():
    xs = np.linspace(0, 200, 4001)
    assert np.all(np.diff(psi(xs)) > 0)


def test_psi_array_matches_scalar():
    xs = [0.0, 0.3, 7.0, 1e5]
    assert np.allclose(psi(np.array(xs)), [psi(x) for x in xs], rtol=0, atol=0)


def test_build_tables_basics():
    t = build_tables(1000, 0.3, 0.5)
    assert t.I == math.ceil(1000**0.3) == 8
    assert t.q[0] == 1.0
    assert t.pi[0] == t.sigma
    assert t.pi[1] == 2 * t.sigma
    assert np.all(np.diff(t.q) < 0)
    assert np.all(t.tau >= 1 - t.delta / 2 - 1e-15)
    assert t.sigma == 1 / math.log(1000) ** 2
    assert t.p == t.sigma / math.sqrt(1000)
    assert t.rho == math.sqrt(0.3 * math.log(1000) / 3000)
    assert t.s == t.n * t.sigma**4 * t.q[t.I] ** 2


@pytest.mark.parametrize("args", [(2, 0.3, 0.5), (100, 0.0, 0.5), (100, 1.0, 0.5),
                                  (100, 1.5, 0.5), (100, 0.3, 0.0), (100, 0.3, 1.5)])
def test_build_tables_domain(args):
    with pytest.raises(ValueError):
        build_tables(*args)


def test_build_tables_deterministic():
    a, b = build_tables(5000, 0.4, 0.3), build_tables(5000, 0.4, 0.3)
    assert a.q.tobytes() == b.q.tobytes() and a.pi.tobytes() == b.pi.tobytes()


def test_p_hat_examples():
    t = build_tables(10**4, 0.3)
    i = 2
    thr = 6 * math.sqrt(t.N) * t.q[i] * (t.pi[i] + math.sqrt(t.sigma))
    assert p_hat(math.ceil(thr), i, t) == 0.0
    assert p_hat(0, i, t) == pytest.approx(1 - (1 - t.p) ** thr, rel=1e-12)
    zero = dataclasses.replace(t, p=0.0)
    assert p_hat(0, i, zero) == 0.0 and p_hat(5, i, zero) == 0.0


@given(st.integers(0, 500), st.integers(0, 500))
@settings(max_examples=200)
def test_p_hat_range_and_monotone(a, b):
    t = build_tables(10**4, 0.3)
    lo, hi = sorted((a, b))
    pa, pb = p_hat(lo, 1, t), p_hat(hi, 1, t)
    assert 0 <= pb <= pa <= 1
    assert p_hat_array([lo, hi], 1, t).tolist() == [pa, pb]


@pytest.mark.parametrize("N,beta", [(10**6, 0.01), (1000, 0.3), (150, 0.5), (150, 0.3)])
def test_bounds_pass(N, beta):
    rep = verify_bounds(build_tables(N, beta, 0.5))
    assert rep.all_passed, rep.failed()
    assert set(rep.checks) == {"a_psi_envelope", "b_q_unit_interval", "c_pi_recursion",
                               "c_pi_minus_psi", "d_sqrt_sigma_pi", "e_q_pi_k",
                               "f_q_step_estimate", "g_q_lower", "h_p_hat_below_q",
                               "i_q_step_range"}


def test_bounds_lower_q_check_engaged_for_long_runs():
    # i sigma reaches past e only for long runs; I = 1000 here
    rep = verify_bounds(build_tables(10**6, 0.5, 0.5))
    assert rep.checks["g_q_lower"].checked > 0
    assert rep.all_passed, rep.failed()


def test_bounds_detect_corrupted_q():
    t = build_tables(10**6, 0.01, 0.5)
    q = t.q.copy()
    q[1] = 1.5
    rep = verify_bounds(dataclasses.replace(t, q=q))
    assert not rep.checks["b_q_unit_interval"].passed
    assert rep.checks["b_q_unit_interval"].location == (1,)


def test_pi_recursion_exact():
    t = build_tables(150, 0.5)
    assert verify_bounds(t).checks["c_pi_recursion"].passed
    assert np.max(np.abs(np.diff(t.pi) - t.sigma * t.q[:-1])) <= 1e-12 * t.I
