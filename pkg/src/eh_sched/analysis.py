"""Linear functionals of the stationary distribution.

Average RES power and the per-level bounds on the stationary mass are both
linear in ``pi``; this module builds their coefficient vectors along with the
local-balance block for states holding energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .model import (
    CaseKind,
    SystemParams,
    build_transition_matrix,
    derive_constants,
    iter_states,
    PolicyParams,
)

BALANCE_TOL = 1e-10


@dataclass(frozen=True)
class SteadyState:
    """Stationary distribution over the flattened ``(i, j)`` grid."""

    pi: np.ndarray
    Q1: int
    Q2: int

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        if pi.shape != ((self.Q1 + 1) * (self.Q2 + 1),):
            raise ValueError(f"pi has shape {pi.shape}, expected {((self.Q1 + 1) * (self.Q2 + 1),)}")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @classmethod
    def for_params(cls, pi, params: SystemParams) -> "SteadyState":
        return cls(pi, params.Q1, params.Q2)

    @property
    def grid(self) -> np.ndarray:
        """``pi`` reshaped to ``(Q1 + 1, Q2 + 1)``."""
        return self.pi.reshape(self.Q1 + 1, self.Q2 + 1)

    @property
    def levels(self) -> np.ndarray:
        """Marginal of the data-queue length."""
        return self.grid.sum(axis=1)

    def __getitem__(self, ij) -> float:
        i, j = ij
        return float(self.grid[i, j])


@dataclass(frozen=True)
class PowerCoefficients:
    xi: np.ndarray  # weights on pi(i, 0)
    zeta: np.ndarray  # weights on pi(i, 1), subtracted


@dataclass(frozen=True)
class BoundSystem:
    """Coefficient vectors over the ``N`` flattened states.

    ``a_u[i] @ pi = pi_i - upper(i)`` and ``a_l[i] @ pi = lower(i) - pi_i``
    for ``i = 1..Q1`` (index 0 unused, kept ``None``).  ``Ps`` holds one
    column of ``P - I`` per state with ``j >= 1``.
    """

    a0: np.ndarray
    a_u: Dict[int, np.ndarray]
    a_l: Dict[int, np.ndarray]
    Ps: np.ndarray = field(repr=False)


def _as_array(pi, params: SystemParams) -> np.ndarray:
    if isinstance(pi, SteadyState):
        pi = pi.pi
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (params.n_states,):
        raise ValueError(f"pi has length {pi.shape}, expected {params.n_states}")
    return pi


def power_coefficients(params: SystemParams) -> PowerCoefficients:
    case = params.require_analytic_case()
    c = derive_constants(params)
    Q1, k1 = params.Q1, params.k1
    eta1, eta2 = params.eta1, params.eta2
    i = np.arange(Q1 + 1, dtype=float)
    if case is CaseKind.I:
        xi = np.full(Q1 + 1, c.mu2 - c.mu0)
        xi[0] = c.mu2
        zeta = np.zeros(Q1 + 1)
    elif case is CaseKind.II:
        xi = c.mu2 + eta2 * (Q1 - i)
        zeta = (1.0 - eta2) * (Q1 - i) + c.mu1
        zeta[0] = c.mu2 * Q1
    else:
        xi = np.empty(Q1 + 1)
        zeta = np.empty(Q1 + 1)
        low = i <= Q1 - k1
        xi[low] = k1 * eta1 - eta2
        xi[~low] = eta1 * (Q1 - i[~low]) - eta2
        zeta[low] = (c.mu1 + c.mu2) * (Q1 + 1 - i[low]) - c.mu2 * k1
        zeta[~low] = c.mu1 * (Q1 + 1 - i[~low])
        xi[0] = c.mu0 * Q1 - c.mu3 + k1 * eta1
        zeta[0] = c.mu2 * (Q1 - k1 + 1)
    return PowerCoefficients(xi, zeta)


def power_vector(params: SystemParams, coeffs: PowerCoefficients = None) -> np.ndarray:
    """``a0`` such that ``pi @ a0`` is the average RES power."""
    if coeffs is None:
        coeffs = power_coefficients(params)
    a0 = np.zeros(params.n_states)
    stride = params.Q2 + 1
    a0[0::stride] = coeffs.xi
    a0[1::stride] -= coeffs.zeta
    return a0


def average_power(pi, coeffs: PowerCoefficients) -> float:
    pi = np.asarray(pi.pi if isinstance(pi, SteadyState) else pi, dtype=float)
    n_levels = len(coeffs.xi)
    if pi.size % n_levels:
        raise ValueError(f"pi of length {pi.size} does not match {n_levels} data levels")
    grid = pi.reshape(n_levels, -1)
    if grid.shape[1] < 2:
        raise ValueError("battery capacity Q2 must be at least 1")
    return float(coeffs.xi @ grid[:, 0] - coeffs.zeta @ grid[:, 1])


def average_delay(pi, params: SystemParams) -> float:
    """Mean queueing delay in slots, by Little's law on the data queue."""
    pi = _as_array(pi, params)
    levels = pi.reshape(params.Q1 + 1, params.Q2 + 1).sum(axis=1)
    return float(np.arange(params.Q1 + 1) @ levels / (params.k1 * params.eta1))


def _level_indicator(params: SystemParams, i: int, weight: float = 1.0) -> np.ndarray:
    v = np.zeros(params.n_states)
    stride = params.Q2 + 1
    v[i * stride:(i + 1) * stride] = weight
    return v


def upper_bound_vector(params: SystemParams, i: int) -> np.ndarray:
    """Coefficients of the level-``i`` upper bound on ``pi_i``."""
    case = params.require_analytic_case()
    c = derive_constants(params)
    stride = params.Q2 + 1
    theta = np.zeros(params.n_states)
    eta2_bar = 1.0 - params.eta2
    if case is CaseKind.I:
        theta[(i - 1) * stride] = c.phi
    elif case is CaseKind.II:
        theta[(i - 1) * stride] += c.tau * eta2_bar
        theta[i * stride] += eta2_bar
    else:
        k1 = params.k1
        theta[i * stride] += eta2_bar
        if i >= k1:
            theta[(i - k1) * stride] += c.tau * eta2_bar
        theta += lower_bound_vector(params, i)
    return theta


def lower_bound_vector(params: SystemParams, i: int) -> np.ndarray:
    """Coefficients of the level-``i`` lower bound on ``pi_i``."""
    case = params.require_analytic_case()
    theta = np.zeros(params.n_states)
    if case is CaseKind.III:
        tau = derive_constants(params).tau
        for m in range(max(i - params.k1 + 1, 0), i):
            theta += _level_indicator(params, m, tau)
    return theta


def balance_submatrix(params: SystemParams) -> np.ndarray:
    """Columns of ``P - I`` for states with stored energy.

    Only rows ``(i, 0)`` depend on the policy and those rows never feed a
    ``j >= 1`` state except through harvests, which are served regardless of
    the policy, so any policy gives the same columns.
    """
    params.require_analytic_case()
    P = build_transition_matrix(params, PolicyParams.constant(params.Q1, 0.0, 0.0))
    P -= np.eye(params.n_states)
    cols = [s for s, (_, j) in enumerate(iter_states(params)) if j >= 1]
    return P[:, cols]


def bound_vectors(params: SystemParams) -> BoundSystem:
    a0 = power_vector(params)
    a_u, a_l = {}, {}
    for i in range(1, params.Q1 + 1):
        level = _level_indicator(params, i)
        a_u[i] = level - upper_bound_vector(params, i)
        a_l[i] = lower_bound_vector(params, i) - level
    return BoundSystem(a0=a0, a_u=a_u, a_l=a_l, Ps=balance_submatrix(params))
