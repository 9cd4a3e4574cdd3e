"""Threshold policies: strict ones, and those recovered from an optimum."""

from __future__ import annotations

import numpy as np

from .model import CaseKind, PolicyParams, SystemParams, derive_constants

PROB_TOL = 1e-9
CROSSCHECK_TOL = 1e-9


class DegeneratePolicyError(ValueError):
    def __init__(self, index: int, reason: str):
        self.index = index
        super().__init__(f"cannot recover policy at queue length {index}: {reason}")


def strict_threshold_policy(params: SystemParams, m: int) -> PolicyParams:
    """Use RES exactly when the post-arrival backlog would exceed ``m``.

    ``m = Q1`` never uses RES: anything beyond the cap is dropped instead.
    """
    if not (0 <= m <= params.Q1):
        raise ValueError(f"threshold m={m} outside [0, {params.Q1}]")
    i = np.arange(params.Q1 + 1)
    g = ((i >= m - params.k1 + 1) & (m < params.Q1)).astype(float)
    f = (i > m).astype(float)
    return PolicyParams(g=g, f=f, threshold=m)


def _fraction(numerator: float, denominator: float, index: int) -> float:
    if not np.isfinite(denominator) or abs(denominator) < 1e-300:
        raise DegeneratePolicyError(index, f"denominator {denominator!r} vanishes")
    value = numerator / denominator
    if not (-PROB_TOL <= value <= 1.0 + PROB_TOL):
        raise DegeneratePolicyError(index, f"probability {value!r} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def extract_policy(params: SystemParams, solution) -> PolicyParams:
    """Transmission probabilities that make ``solution.pi_star`` stationary.

    Queue lengths the optimum never visits get ``g = 1`` (and ``f = 1`` when
    k1 > 1) so the policy also drains the queue from arbitrary starting
    states.  With k1 = 1, ``f`` stays 0 throughout.
    """
    case = params.require_analytic_case()
    Q1, k1 = params.Q1, params.k1
    i_star = solution.i_star
    if i_star is None:
        return strict_threshold_policy(params, Q1)

    g = np.ones(Q1 + 1)
    f = np.ones(Q1 + 1) if case is CaseKind.III else np.zeros(Q1 + 1)
    f[0] = 0.0
    if i_star == 0:
        # with k1 > 1 the leftover k1 - 1 packets need f = 1 to drain
        return PolicyParams(g=g, f=f, threshold=0)

    c = derive_constants(params)
    grid = solution.pi_star.grid
    levels = grid.sum(axis=1)
    eta1_bar = 1.0 - params.eta1
    lo = i_star - k1
    g[: max(lo, 0)] = 0.0
    f[1:i_star + 1] = 0.0

    if case is CaseKind.I:
        prev = grid[i_star - 1, 0]
        g[lo] = 1.0 - _fraction(grid[i_star, 0], prev * c.phi, lo)
        # Closed-form counterpart 1 - (1/pi(0,0) - H) / phi^i*, with pi(0,0)
        # taken from the parameters.  Both subtractions cancel badly near the
        # stability edge or for deep thresholds, so the tolerance carries
        # their rounding bound.
        drift = c.mu2 - c.mu0
        num = params.pmax - drift
        inv_pi00 = (c.mu2 - c.alpha * drift) / num
        H = c.alpha + sum(c.phi**i for i in range(1, i_star))
        closed = 1.0 - (inv_pi00 - H) / c.phi**i_star
        eps = np.finfo(float).eps
        rel_inv = eps * (params.pmax + abs(drift)) / abs(num) + 4 * eps
        tol = CROSSCHECK_TOL + 4 * (abs(inv_pi00) * rel_inv + (i_star + 2) * eps * H) / c.phi**i_star
        if abs(closed - g[lo]) > tol:
            raise DegeneratePolicyError(lo, f"component form {g[lo]} != closed form {closed}")
    elif case is CaseKind.II:
        num = grid[i_star, 0] * c.mu0 + eta1_bar * grid[i_star, 1:].sum()
        g[lo] = 1.0 - _fraction(num, c.mu2 * grid[lo, 0], lo)
    elif lo >= 0:
        # Cut between levels i*-1 and i*: the deficit is absorbed either by
        # g at i*-k1 (with f at i* off) or by f at i* (with g at i*-k1 on).
        window = levels[lo + 1:i_star].sum()
        slack = eta1_bar * levels[i_star] - params.eta1 * window
        try:
            g[lo] = 1.0 - _fraction(slack - grid[i_star, 0] * c.mu1, c.mu2 * grid[lo, 0], lo)
        except DegeneratePolicyError:
            g[lo] = 1.0
            f[i_star] = 1.0 - _fraction(slack, grid[i_star, 0] * c.mu1, i_star)
    else:
        below = levels[:i_star].sum()
        num = params.eta1 * below - eta1_bar * levels[i_star] + grid[i_star, 0] * c.mu1
        f[i_star] = _fraction(num, grid[i_star, 0] * c.mu1, i_star)
    return PolicyParams(g=g, f=f, threshold=i_star)
