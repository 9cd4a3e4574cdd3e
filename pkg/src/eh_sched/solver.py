"""Optimal stationary distributions and the threshold search.

Two independent routes produce the optimum in the k1 = k2 = 1 case: the
closed form in :func:`solve_case1` and the linear-system threshold search in
:func:`find_optimal`.  :func:`steady_state` is the brute-force oracle used to
check both.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .analysis import (
    BoundSystem,
    SteadyState,
    average_delay,
    average_power,
    bound_vectors,
    power_coefficients,
)
from .linalg import SingularMatrixError, solve_dense_linear
from .model import (
    CaseKind,
    PolicyParams,
    SystemParams,
    build_transition_matrix,
    check_stability,
    UnsupportedCaseError,
    derive_constants,
    iter_states,
    state_index,
)
from .policy import extract_policy

CLAMP_TOL = 1e-9
RESIDUAL_TOL = 1e-10
INFEASIBLE_MESSAGE = "optimal solution and parameters do not exist"


class InfeasibleError(ValueError):
    """pmax does not exceed k1*eta1 - k2*eta2: the data queue cannot be stable."""


class SolverError(RuntimeError):
    pass


class CapacityWarning(RuntimeWarning):
    """The data-queue capacity Q1 is too small for the computed threshold."""


@dataclass(frozen=True)
class OptimalSolution:
    params: SystemParams
    pi_star: SteadyState
    i_star: Optional[int]  # None stands for an unbounded threshold
    delay: float
    power: float
    policy: PolicyParams
    thresholds: List[float] = field(default_factory=list)  # p~_0 .. p~_{i*}

    @property
    def unbounded(self) -> bool:
        return self.i_star is None


def _clamp(pi: np.ndarray, context: str) -> np.ndarray:
    worst = float(pi.min())
    if worst < -CLAMP_TOL:
        raise SolverError(f"negative probability {worst:.3e} ({context})")
    pi = np.where(pi < 0.0, 0.0, pi)
    return pi / pi.sum()


def steady_state(params: SystemParams, policy: PolicyParams) -> SteadyState:
    """Stationary distribution of the chain induced by ``policy``.

    Solves ``pi (P - I) = 0`` with one balance column swapped for the
    normalisation.  Requires a single recurrent class.
    """
    P = build_transition_matrix(params, policy)
    n = params.n_states
    A = P - np.eye(n)
    A[:, -1] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = _clamp(solve_dense_linear(A, b, context="steady state"), "steady state")
    residual = float(np.abs(pi @ P - pi).max())
    if residual > RESIDUAL_TOL:
        raise SolverError(f"steady-state residual {residual:.3e} exceeds {RESIDUAL_TOL}")
    return SteadyState.for_params(pi, params)


def _require_solvable(params: SystemParams) -> CaseKind:
    case = params.require_analytic_case()
    params.require_interior()
    if case is not CaseKind.I and params.Q2 < 2:
        # with Q2 = 1 a harvest into an empty battery is spent at once and
        # the power coefficients no longer describe the chain
        raise UnsupportedCaseError(f"case {case.value} needs Q2 >= 2, got Q2={params.Q2}")
    return case


def _require_stable(params: SystemParams) -> None:
    if not check_stability(params):
        raise InfeasibleError(
            f"{INFEASIBLE_MESSAGE}: pmax={params.pmax} <= "
            f"k1*eta1 - k2*eta2 = {params.k1 * params.eta1 - params.k2 * params.eta2}"
        )


def _transient_states(params: SystemParams) -> np.ndarray:
    """Flat indices of the k1 = k2 = 1 states with both queues nonempty."""
    return np.array(
        [state_index(i, j, params) for i, j in iter_states(params) if i > 0 and j > 0],
        dtype=int,
    )


def _solve_system(params, columns: Sequence[np.ndarray], rhs: np.ndarray, context: str) -> np.ndarray:
    A = np.column_stack(columns)
    try:
        return solve_dense_linear(A, rhs, context=context)
    except SingularMatrixError:
        if params.case is not CaseKind.I:
            raise
    # Transient states carry no mass; drop them with their own balance columns.
    drop = _transient_states(params)
    keep_rows = np.setdiff1d(np.arange(params.n_states), drop)
    ps_states = [state_index(i, j, params) for i, j in iter_states(params) if j >= 1]
    n_lead = A.shape[1] - len(ps_states) - 1
    drop_cols = {n_lead + k for k, s in enumerate(ps_states) if s in set(drop.tolist())}
    keep_cols = [c for c in range(A.shape[1]) if c not in drop_cols]
    x = solve_dense_linear(A[np.ix_(keep_rows, keep_cols)], rhs[keep_cols], context=context)
    full = np.zeros(params.n_states)
    full[keep_rows] = x
    return full


def threshold_distribution(params: SystemParams, m: int, bounds: Optional[BoundSystem] = None) -> np.ndarray:
    """Solution of the strict threshold-``m`` system (upper bounds up to ``m``)."""
    _require_solvable(params)
    if not (0 <= m <= params.Q1):
        raise ValueError(f"threshold m={m} outside [0, {params.Q1}]")
    if bounds is None:
        bounds = bound_vectors(params)
    cols = [bounds.a_u[i] for i in range(1, m + 1)]
    cols += [bounds.a_l[i] for i in range(m + 1, params.Q1 + 1)]
    cols += list(bounds.Ps.T)
    cols.append(np.ones(params.n_states))
    rhs = np.zeros(params.n_states)
    rhs[-1] = 1.0
    pi = _solve_system(params, cols, rhs, context=f"threshold m={m}")
    return _clamp(pi, f"threshold m={m}")


def power_threshold(params: SystemParams, m: int, bounds: Optional[BoundSystem] = None) -> float:
    """RES power of the strict threshold-``m`` policy."""
    if bounds is None:
        bounds = bound_vectors(params)
    return float(threshold_distribution(params, m, bounds) @ bounds.a0)


def power_thresholds(
    params: SystemParams,
    stop_at: Optional[float] = None,
    max_m: Optional[int] = None,
    bounds: Optional[BoundSystem] = None,
) -> List[float]:
    """``[p~_0, p~_1, ...]`` up to ``max_m`` (default Q1).

    With ``stop_at`` the list ends at the first value ``<= stop_at``.
    """
    if bounds is None:
        bounds = bound_vectors(params)
    last = params.Q1 if max_m is None else min(max_m, params.Q1)
    values = []
    for m in range(last + 1):
        values.append(power_threshold(params, m, bounds))
        if stop_at is not None and values[-1] <= stop_at:
            break
    return values


def _finish(params, pi, i_star, thresholds) -> OptimalSolution:
    pi_state = SteadyState.for_params(pi, params)
    if i_star is None or i_star + params.k1 > params.Q1:
        warnings.warn(
            f"threshold {'unbounded' if i_star is None else i_star} leaves no headroom "
            f"below Q1={params.Q1}; increase Q1",
            CapacityWarning,
            stacklevel=3,
        )
    solution = OptimalSolution(
        params=params,
        pi_star=pi_state,
        i_star=i_star,
        delay=average_delay(pi_state, params),
        power=average_power(pi_state, power_coefficients(params)),
        policy=PolicyParams.constant(params.Q1, 0.0, 0.0),
        thresholds=list(thresholds),
    )
    return dataclasses.replace(solution, policy=extract_policy(params, solution))


def find_optimal(params: SystemParams, thresholds: Optional[Sequence[float]] = None) -> OptimalSolution:
    """Threshold search over ``p~_m`` followed by one square linear solve.

    ``thresholds`` may carry precomputed ``p~_0, p~_1, ...`` for the same
    system (they do not depend on ``pmax``); missing entries are computed.
    """
    _require_solvable(params)
    _require_stable(params)
    bounds = bound_vectors(params)
    known = list(thresholds or [])

    def p_tilde(m: int) -> float:
        while len(known) <= m:
            known.append(power_threshold(params, len(known), bounds))
        return known[m]

    pmax = params.pmax
    if pmax >= p_tilde(0):
        return _finish(params, threshold_distribution(params, 0, bounds), 0, known[:1])
    for m in range(1, params.Q1 + 1):
        if p_tilde(m) <= pmax:
            cols = [bounds.a0]
            cols += [bounds.a_u[i] for i in range(1, m)]
            cols += [bounds.a_l[i] for i in range(m + 1, params.Q1 + 1)]
            cols += list(bounds.Ps.T)
            cols.append(np.ones(params.n_states))
            rhs = np.zeros(params.n_states)
            rhs[0] = pmax
            rhs[-1] = 1.0
            pi = _solve_system(params, cols, rhs, context=f"optimum at i*={m}")
            return _finish(params, _clamp(pi, f"optimum at i*={m}"), m, known[: m + 1])
    pi = threshold_distribution(params, params.Q1, bounds)
    return _finish(params, pi, None, known[: params.Q1 + 1])


def _geometric_partial(phi: float, n: int) -> float:
    """sum_{m=1}^{n} phi^m by direct accumulation."""
    total, term = 0.0, 1.0
    for _ in range(n):
        term *= phi
        total += term
    return total


def omega(phi: float, a: float, b: float) -> float:
    """Largest ``i`` with ``a * sum_{m=1}^{i-1} phi^m <= b`` (floor/log form).

    Returns ``inf`` when ``phi < 1`` and the whole geometric tail fits under ``b``.
    """
    if phi == 1.0:
        return float(math.floor(b / a) + 1)
    arg = ((a + b) * phi - b) / a
    if arg <= 0.0:
        return math.inf
    return float(math.floor(math.log(arg, phi)))


def case1_power_threshold(params: SystemParams, m: int) -> float:
    """Closed-form ``p~_m`` for k1 = k2 = 1."""
    c = derive_constants(params)
    s = _geometric_partial(c.phi, m)
    pi00 = 1.0 / (c.alpha + s)
    return c.mu2 * pi00 + (c.mu2 - c.mu0) * pi00 * s


def solve_case1(params: SystemParams) -> OptimalSolution:
    """Closed-form optimum for k1 = k2 = 1."""
    if _require_solvable(params) is not CaseKind.I:
        raise ValueError(f"solve_case1 needs k1 = k2 = 1, got case {params.case.value}")
    _require_stable(params)
    c = derive_constants(params)
    stride = params.Q2 + 1
    pi = np.zeros(params.n_states)
    # pi(0, j) relative to pi(0, 0); these sum to alpha
    weights = np.array(
        [c.phi ** (-j) for j in range(params.Q2)] + [c.phi ** (-(params.Q2 - 1)) / c.phi1]
    )
    p0 = c.mu2 / c.alpha
    pmax = params.pmax
    if pmax >= p0:
        pi[0:stride] = weights / c.alpha
        return _finish(params, pi, 0, [p0])

    pi00 = (pmax - (c.mu2 - c.mu0)) / (c.mu2 - c.alpha * (c.mu2 - c.mu0))
    rest = 1.0 - c.alpha * pi00
    # smallest i whose cumulative geometric mass reaches the remaining mass;
    # a tie lands on the lower index
    i_star, cum, term = None, 0.0, pi00
    for i in range(1, params.Q1 + 1):
        term *= c.phi
        if cum + term >= rest:
            i_star = i
            break
        cum += term
    if i_star is None:
        s = _geometric_partial(c.phi, params.Q1)
        pi00 = 1.0 / (c.alpha + s)
        pi[0:stride] = weights * pi00
        for i in range(1, params.Q1 + 1):
            pi[i * stride] = pi00 * c.phi**i
        return _finish(
            params, pi, None, [case1_power_threshold(params, m) for m in range(params.Q1 + 1)]
        )

    ref = omega(c.phi, pi00, rest)
    if abs(ref - i_star) > 1:
        raise SolverError(f"threshold {i_star} disagrees with closed-form index {ref}")
    pi[0:stride] = weights * pi00
    for i in range(1, i_star):
        pi[i * stride] = pi00 * c.phi**i
    pi[i_star * stride] = rest - cum
    thresholds = [case1_power_threshold(params, m) for m in range(i_star + 1)]
    return _finish(params, _clamp(pi, "closed form"), i_star, thresholds)


def solve(params: SystemParams, thresholds: Optional[Sequence[float]] = None) -> OptimalSolution:
    """Closed form when k1 = k2 = 1, threshold search otherwise."""
    if params.case is CaseKind.I:
        return solve_case1(params)
    return find_optimal(params, thresholds)
