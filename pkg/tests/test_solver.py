import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eh_sched.analysis import average_delay, bound_vectors
from eh_sched.model import (
    CaseKind,
    PolicyParams,
    SystemParams,
    UnsupportedCaseError,
    build_transition_matrix,
    derive_constants,
    policy_power,
)
from eh_sched.policy import strict_threshold_policy
from eh_sched.solver import (
    INFEASIBLE_MESSAGE,
    CapacityWarning,
    InfeasibleError,
    SolverError,
    _clamp,
    _geometric_partial,
    case1_power_threshold,
    find_optimal,
    omega,
    power_threshold,
    power_thresholds,
    solve,
    solve_case1,
    steady_state,
)
from eh_sched.validate import random_params, random_policy

from oracles import exact_case1_chain, exact_stationary, stationary_by_eigenvector

pytestmark = pytest.mark.usefixtures("quiet_capacity")


# --- oracle -----------------------------------------------------------------------


def test_oracle_strict_threshold_uniform(W):
    c = derive_constants(W)
    for m in range(6):
        pi = steady_state(W.replace(Q1=10), strict_threshold_policy(W.replace(Q1=10), m)).grid
        assert np.allclose(pi[: m + 1, 0], 1 / (c.alpha + m), atol=1e-12)
        assert pi[m + 1:].sum() <= 1e-12


def test_oracle_always_transmit(W):
    p = W.replace(Q1=8)
    pi = steady_state(p, PolicyParams.constant(8, 1.0, 0.0)).grid
    assert pi[1:, 0].max() <= 1e-14


def test_oracle_certain_harvest():
    p = SystemParams(0.4, 1.0, Q2=3, Q1=5)
    pi = steady_state(p, PolicyParams.constant(5, 0.0, 0.0)).grid
    # the queue never builds up and an empty battery is transient
    assert pi[:, 0].sum() <= 1e-12
    assert pi[1:].sum() <= 1e-12


def test_oracle_matches_eigenvector(rng):
    for case in (CaseKind.I, CaseKind.II, CaseKind.III):
        p = random_params(case, rng, Q1=12)
        pol = random_policy(p, rng, drain_level=4)
        ours = steady_state(p, pol).pi
        ref = stationary_by_eigenvector(build_transition_matrix(p, pol))
        assert np.abs(ours - ref).max() <= 1e-10


def test_oracle_handles_general_case(rng):
    p = SystemParams(0.2, 0.3, 2, 2, Q2=3, Q1=10)
    pol = random_policy(p, rng, drain_level=3)
    pi = steady_state(p, pol)
    P = build_transition_matrix(p, pol)
    assert np.abs(pi.pi @ P - pi.pi).max() <= 1e-10


def test_clamp_rules():
    out = _clamp(np.array([0.5, -1e-12, 0.5]), "x")
    assert out.min() == 0.0 and out.sum() == pytest.approx(1.0)
    with pytest.raises(SolverError, match="negative"):
        _clamp(np.array([0.5, -1e-6, 0.5]), "x")


# --- closed form --------------------------------------------------------------------


def test_worked_instance_closed_form(W):
    s = solve_case1(W)
    g = s.pi_star.grid
    assert s.i_star == 4
    assert g[0, 0] == pytest.approx(0.2, abs=1e-12)
    assert g[0, 1] == pytest.approx(0.14, abs=1e-12)
    assert np.allclose(g[1:4, 0], 0.2, atol=1e-12)
    assert g[4, 0] == pytest.approx(0.06, abs=1e-12)
    assert s.delay == pytest.approx(4.8, abs=1e-12)
    assert s.power == pytest.approx(0.042, abs=1e-12)


def test_worked_instance_exact_rationals(W):
    """Exact arithmetic on the chain under the extracted policy."""
    Q1 = 6
    g = [0, 0, 0, Fraction(7, 10), 1, 1, 1]
    P = exact_case1_chain(Fraction(3, 10), Q1, 1, g, [0] * (Q1 + 1))
    pi = exact_stationary(P)
    grid = [pi[2 * i:2 * i + 2] for i in range(Q1 + 1)]
    assert grid[0] == [Fraction(1, 5), Fraction(7, 50)]
    assert [row[0] for row in grid[1:5]] == [Fraction(1, 5)] * 3 + [Fraction(3, 50)]
    assert sum(i * sum(row) for i, row in enumerate(grid)) / Fraction(3, 10) == Fraction(24, 5)
    mu2 = Fraction(21, 100)
    assert sum(row[0] * mu2 * g[i] for i, row in enumerate(grid)) == Fraction(42, 1000)
    s = solve_case1(W.replace(Q1=Q1))
    assert np.abs(s.pi_star.pi - np.array([float(x) for x in pi])).max() <= 1e-14


def test_abundant_budget(W):
    s = solve_case1(W.replace(pmax=0.13))
    assert s.i_star == 0 and s.delay == 0.0
    assert s.pi_star[(0, 0)] == pytest.approx(1 / 1.7, abs=1e-12)


@pytest.mark.parametrize("eta,Q2", [(0.3, 1), (0.3, 4), (0.6, 2), (0.15, 7)])
def test_first_threshold_equal_rates(eta, Q2):
    p = SystemParams(eta, eta, Q2=Q2, Q1=20)
    c = derive_constants(p)
    expect = c.mu2 / (Q2 + 1 / c.phi1)
    assert case1_power_threshold(p, 0) == pytest.approx(expect, rel=1e-14)
    assert power_threshold(p, 0) == pytest.approx(expect, rel=1e-10)


def test_case1_rejects_other_cases():
    with pytest.raises(ValueError, match="k1 = k2 = 1"):
        solve_case1(SystemParams(0.1, 0.3, 2, 1, Q2=3, pmax=0.1, Q1=10))


def test_omega_matches_summation():
    for phi in (0.4, 1.0, 1.7):
        for a in (0.05, 0.2):
            for b in np.linspace(0.01, 0.9, 25):
                ref = omega(phi, a, b)
                if phi < 1 and a * phi / (1 - phi) <= b:
                    assert ref == math.inf
                    continue
                n = 1
                while a * _geometric_partial(phi, n) <= b:
                    n += 1
                assert ref == n


def test_tie_resolves_to_lower_index(W):
    p4 = case1_power_threshold(W, 4)
    assert solve_case1(W.replace(pmax=p4)).i_star == 4
    exact = find_optimal(W.replace(pmax=power_threshold(W, 4)))
    assert exact.i_star == 4


def test_capacity_sentinel(W):
    with pytest.warns(CapacityWarning):
        s = solve_case1(W.replace(pmax=0.005, Q1=5))
    assert s.unbounded and s.i_star is None
    with pytest.warns(CapacityWarning):
        t = find_optimal(W.replace(pmax=0.005, Q1=5))
    assert t.unbounded
    assert np.abs(s.pi_star.pi - t.pi_star.pi).max() <= 1e-10


def test_headroom_warning(W):
    with pytest.warns(CapacityWarning, match="Q1=4"):
        solve_case1(W.replace(Q1=4))


# --- thresholds ---------------------------------------------------------------------


def test_worked_instance_thresholds(W):
    assert power_threshold(W, 3) == pytest.approx(0.21 / 4.7, abs=1e-12)
    assert power_threshold(W, 4) == pytest.approx(0.21 / 5.7, abs=1e-12)
    assert power_threshold(W, 0) == pytest.approx(0.21 / derive_constants(W).alpha, abs=1e-12)


def test_threshold_range(W):
    with pytest.raises(ValueError, match="outside"):
        power_threshold(W.replace(Q1=5), 6)


def test_threshold_matches_strict_policy_power(rng):
    for case in (CaseKind.II, CaseKind.III):
        p = random_params(case, rng, Q1=30)
        for m in (0, 2, 5):
            pol = strict_threshold_policy(p, m)
            pi = steady_state(p, pol).pi
            assert power_threshold(p, m) == pytest.approx(policy_power(p, pol, pi), abs=1e-10)


def test_thresholds_stop_early(W):
    vals = power_thresholds(W, stop_at=0.05)
    assert len(vals) == 4 and vals[-1] <= 0.05 < vals[-2]


@st.composite
def batch_params(draw):
    case = draw(st.sampled_from([CaseKind.II, CaseKind.III]))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_params(case, np.random.default_rng(seed), Q1=25)


@settings(max_examples=15)
@given(batch_params())
def test_thresholds_non_increasing(p):
    vals = power_thresholds(p, max_m=20)
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


@settings(max_examples=15)
@given(batch_params(), st.floats(0.05, 0.95))
def test_threshold_index_is_first_below_budget(p, u):
    lo = max(p.k1 * p.eta1 - p.k2 * p.eta2, 0.0)
    vals = power_thresholds(p)
    p = p.replace(pmax=float(lo + u * (vals[0] - lo)))
    s = find_optimal(p, thresholds=vals)
    first = next((m for m, v in enumerate(vals) if v <= p.pmax), None)
    assert s.i_star == first


# --- search -------------------------------------------------------------------------


def test_search_matches_closed_form_on_worked_instance(W):
    a, b = solve_case1(W), find_optimal(W)
    assert a.i_star == b.i_star == 4
    assert np.abs(a.pi_star.pi - b.pi_star.pi).max() <= 1e-8
    assert abs(a.delay - b.delay) <= 1e-8


def test_search_batch_harvest_example():
    # budget above the stability edge 0.5 - 4 * 0.1
    p = SystemParams(0.5, 0.1, 1, 4, Q2=5, pmax=0.2)
    s = find_optimal(p)
    assert s.i_star >= 1
    assert s.power == pytest.approx(0.2, abs=1e-9)
    assert s.pi_star.grid[s.i_star + 1:].max() <= 1e-12


@pytest.mark.parametrize(
    "p",
    [
        SystemParams(0.5, 0.1, 1, 2, Q2=5, pmax=0.2),
        SystemParams(0.5, 0.1, 1, 2, Q2=5, pmax=0.3),
        SystemParams(0.3, 0.3, pmax=0.0),
        SystemParams(0.3, 0.1, 2, 1, Q2=3, pmax=0.5),
    ],
)
def test_infeasible_budget(p):
    with pytest.raises(InfeasibleError, match=INFEASIBLE_MESSAGE):
        solve(p)


def test_unsupported_inputs():
    with pytest.raises(UnsupportedCaseError):
        solve(SystemParams(0.1, 0.3, 2, 2, Q2=3, pmax=0.2, Q1=10))
    with pytest.raises(UnsupportedCaseError, match="Q2 >= 2"):
        find_optimal(SystemParams(0.5, 0.3, 1, 2, Q2=1, pmax=0.2, Q1=10))
    with pytest.raises(ValueError, match="eta"):
        solve(SystemParams(0.3, 1.0, Q2=2, pmax=0.2, Q1=10))


def _budget(p, rng, lo_frac=0.05, hi_frac=0.95):
    lo = max(p.k1 * p.eta1 - p.k2 * p.eta2, 0.0)
    top = power_threshold(p, 0)
    return p.replace(pmax=float(lo + rng.uniform(lo_frac, hi_frac) * (top - lo)))


@pytest.mark.parametrize("case", [CaseKind.I, CaseKind.II, CaseKind.III])
def test_optimum_structure(case, rng):
    for _ in range(8):
        p = _budget(random_params(case, rng, Q1=40), rng)
        s = find_optimal(p)
        if s.unbounded:
            continue
        B = bound_vectors(p)
        pi = s.pi_star.pi
        assert all(abs(pi @ B.a_u[i]) <= 1e-9 for i in range(1, s.i_star))
        assert all(abs(pi @ B.a_l[i]) <= 1e-9 for i in range(s.i_star + 1, p.Q1 + 1))
        assert pi @ B.a0 == pytest.approx(p.pmax, abs=1e-9)


@pytest.mark.parametrize("case", [CaseKind.I, CaseKind.II, CaseKind.III])
def test_delay_beats_random_feasible_policies(case, rng):
    p = _budget(random_params(case, rng, Q1=30), rng, 0.2, 0.8)
    best = find_optimal(p).delay
    checked = 0
    for _ in range(400):
        pol = random_policy(p, rng, drain_level=int(rng.integers(1, 12)))
        # shrink toward pure harvesting until the budget fits
        for _ in range(6):
            pi = steady_state(p, pol)
            if policy_power(p, pol, pi.pi) <= p.pmax:
                assert average_delay(pi, p) >= best - 1e-9
                checked += 1
                break
            pol = PolicyParams(np.asarray(pol.g) * 0.5, np.asarray(pol.f) * 0.5)
        if checked == 30:
            break
    assert checked == 30


@pytest.mark.parametrize(
    "base",
    [
        SystemParams(0.3, 0.3, Q2=2),
        SystemParams(0.5, 0.1, 1, 3, Q2=5),
        SystemParams(0.1, 0.3, 3, 1, Q2=5, Q1=60),
    ],
)
def test_delay_non_increasing_in_budget(base):
    vals = power_thresholds(base, max_m=base.Q1)
    lo = max(base.k1 * base.eta1 - base.k2 * base.eta2, 0.0)
    grid = np.linspace(lo, vals[0], 14)[2:]
    delays = [solve(base.replace(pmax=float(x)), thresholds=vals).delay for x in grid]
    assert all(b <= a + 1e-10 for a, b in zip(delays, delays[1:]))


def test_precomputed_thresholds_reused(W):
    vals = power_thresholds(W, max_m=10)
    a = find_optimal(W, thresholds=vals)
    b = find_optimal(W)
    assert np.array_equal(a.pi_star.pi, b.pi_star.pi)
    assert a.thresholds == b.thresholds


def test_no_capacity_warning_with_headroom(W):
    with warnings.catch_warnings():
        warnings.simplefilter("error", CapacityWarning)
        solve(W)
