"""System parameters, state indexing and the policy-driven transition matrix.

The chain state is ``(i, j)``: ``i`` backlogged data packets and ``j`` stored
energy packets.  States are flattened row-major as ``i * (Q2 + 1) + j`` so the
ordering is (0,0), ..., (0,Q2), (1,0), ..., (Q1,Q2).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

DEFAULT_Q1 = 100


class CaseKind(enum.Enum):
    I = "I"  # k1 = 1, k2 = 1
    II = "II"  # k1 = 1, k2 > 1
    III = "III"  # k1 > 1, k2 = 1
    GENERAL = "General"  # k1 > 1, k2 > 1; simulator and oracle only


class UnsupportedCaseError(ValueError):
    """Raised by the analytical machinery for the k1 > 1, k2 > 1 case."""


@dataclass(frozen=True)
class SystemParams:
    """Arrival/harvest statistics, batch sizes and queue capacities.

    ``eta1``/``eta2`` may sit on the closed interval [0, 1] so the simulator
    can explore boundary regimes; the analytical path calls
    :meth:`require_interior`.
    """

    eta1: float
    eta2: float
    k1: int = 1
    k2: int = 1
    Q2: int = 1
    pmax: float = 0.0
    Q1: int = DEFAULT_Q1

    def __post_init__(self):
        for name in ("eta1", "eta2"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        for name in ("k1", "k2", "Q1", "Q2"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.Q1 < self.k1:
            raise ValueError(f"Q1={self.Q1} must be at least k1={self.k1}")
        if not (0.0 <= self.pmax <= 1.0):
            raise ValueError(f"pmax must lie in [0, 1], got {self.pmax!r}")

    @property
    def case(self) -> CaseKind:
        if self.k1 == 1:
            return CaseKind.I if self.k2 == 1 else CaseKind.II
        return CaseKind.III if self.k2 == 1 else CaseKind.GENERAL

    @property
    def n_states(self) -> int:
        return (self.Q1 + 1) * (self.Q2 + 1)

    def require_interior(self) -> None:
        if not (0.0 < self.eta1 < 1.0 and 0.0 < self.eta2 < 1.0):
            raise ValueError(
                "analytical solver needs 0 < eta1 < 1 and 0 < eta2 < 1, "
                f"got eta1={self.eta1}, eta2={self.eta2}"
            )

    def require_analytic_case(self) -> CaseKind:
        case = self.case
        if case is CaseKind.GENERAL:
            raise UnsupportedCaseError(
                f"no analytical solution for k1={self.k1} > 1 and k2={self.k2} > 1"
            )
        return case

    def replace(self, **changes) -> "SystemParams":
        fields = dict(
            eta1=self.eta1, eta2=self.eta2, k1=self.k1, k2=self.k2,
            Q2=self.Q2, pmax=self.pmax, Q1=self.Q1,
        )
        fields.update(changes)
        return SystemParams(**fields)


@dataclass(frozen=True)
class DerivedConstants:
    mu0: float  # no data, harvest
    mu1: float  # no data, no harvest
    mu2: float  # data, no harvest
    mu3: float  # data and harvest
    tau: float
    phi: float
    phi1: float
    alpha: float


def slot_probabilities(eta1: float, eta2: float) -> Tuple[float, float, float, float]:
    """Joint probabilities of the four arrival events within one slot."""
    return (
        (1.0 - eta1) * eta2,
        (1.0 - eta1) * (1.0 - eta2),
        eta1 * (1.0 - eta2),
        eta1 * eta2,
    )


def derive_constants(params: SystemParams) -> DerivedConstants:
    params.require_interior()
    eta1, Q2 = params.eta1, params.Q2
    mu0, mu1, mu2, mu3 = slot_probabilities(eta1, params.eta2)
    tau = eta1 / (1.0 - eta1)
    phi = mu2 / mu0
    phi1 = eta1 / mu0
    # phi == 1 exactly iff eta1 == eta2; mu2/mu0 is computed from identical
    # products in that case so the float comparison is safe.
    if params.eta1 == params.eta2:
        phi = 1.0
        alpha = Q2 + 1.0 / phi1
    else:
        alpha = (phi1 * phi**Q2 + phi - phi1 - 1.0) / (
            phi ** (Q2 - 1) * (phi - 1.0) * phi1
        )
    return DerivedConstants(mu0, mu1, mu2, mu3, tau, phi, phi1, alpha)


def check_stability(params: SystemParams) -> bool:
    """Loynes condition: RES budget plus harvest rate exceeds the arrival rate."""
    return params.pmax > params.k1 * params.eta1 - params.k2 * params.eta2


def state_index(i: int, j: int, params: SystemParams) -> int:
    if not (0 <= i <= params.Q1 and 0 <= j <= params.Q2):
        raise IndexError(f"state ({i}, {j}) outside [0, {params.Q1}] x [0, {params.Q2}]")
    return i * (params.Q2 + 1) + j


def state_of(flat: int, params: SystemParams) -> Tuple[int, int]:
    if not (0 <= flat < params.n_states):
        raise IndexError(f"flat index {flat} outside [0, {params.n_states})")
    return divmod(flat, params.Q2 + 1)


def iter_states(params: SystemParams) -> Iterator[Tuple[int, int]]:
    for i in range(params.Q1 + 1):
        for j in range(params.Q2 + 1):
            yield i, j


@dataclass(frozen=True)
class PolicyParams:
    """Randomised RES usage when no harvested energy is available.

    ``g[i]``: probability of transmitting with RES when a data batch arrives
    at queue length ``i``.  ``f[i]``: same when nothing arrives; ``f[0]`` is
    never used.
    """

    g: Tuple[float, ...]
    f: Tuple[float, ...]
    threshold: Optional[int] = None

    def __post_init__(self):
        g = tuple(float(x) for x in self.g)
        f = tuple(float(x) for x in self.f)
        if len(g) != len(f):
            raise ValueError(f"g and f lengths differ ({len(g)} vs {len(f)})")
        for name, seq in (("g", g), ("f", f)):
            for i, x in enumerate(seq):
                if not (0.0 <= x <= 1.0):
                    raise ValueError(f"{name}[{i}]={x!r} outside [0, 1]")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "f", f)

    @classmethod
    def constant(cls, Q1: int, g: float, f: float) -> "PolicyParams":
        return cls(g=(g,) * (Q1 + 1), f=(f,) * (Q1 + 1))

    def check_length(self, params: SystemParams) -> None:
        if len(self.g) != params.Q1 + 1:
            raise ValueError(
                f"policy has {len(self.g)} entries but Q1={params.Q1} needs {params.Q1 + 1}"
            )


@dataclass(frozen=True)
class Transition:
    """Outcome of one slot given the queue state, arrivals and the RES coin."""

    state: Tuple[int, int]
    served: bool
    res_used: bool
    dropped: int


def slot_transition(
    i: int,
    j: int,
    a1: int,
    a2: int,
    use_res: bool,
    params: SystemParams,
) -> Transition:
    """Apply the scheduling rule for one slot.

    Harvested energy is stored (clipped at ``Q2``) before it is spent, so a
    full battery with a fresh harvest still ends the slot at ``Q2 - 1`` when a
    packet goes out.  ``use_res`` is consulted only when no harvested energy
    exists and there is something to send.
    """
    energy = min(j + a2, params.Q2)
    backlog = i + a1
    if energy > 0 and backlog > 0:
        served, res, energy = True, False, energy - 1
    elif energy == 0 and use_res and ((a1 > 0) or i > 0):
        served, res = True, True
    else:
        served, res = False, False
    backlog -= int(served)
    dropped = max(0, backlog - params.Q1)
    return Transition((backlog - dropped, energy), served, res, dropped)


def res_probability(i: int, a1: int, policy: PolicyParams) -> float:
    """Probability of drawing RES energy from ``(i, 0)`` with no harvest."""
    if a1 > 0:
        return policy.g[i]
    return policy.f[i] if i > 0 else 0.0


def build_transition_matrix(params: SystemParams, policy: PolicyParams) -> np.ndarray:
    policy.check_length(params)
    mus = slot_probabilities(params.eta1, params.eta2)
    # (a1, a2, probability) for the four arrival events
    events = (
        (0, params.k2, mus[0]),
        (0, 0, mus[1]),
        (params.k1, 0, mus[2]),
        (params.k1, params.k2, mus[3]),
    )
    n = params.n_states
    P = np.zeros((n, n))
    for s, (i, j) in enumerate(iter_states(params)):
        for a1, a2, p in events:
            if p == 0.0:
                continue
            if j == 0 and a2 == 0:
                q = res_probability(i, a1, policy)
                for use_res, w in ((True, q), (False, 1.0 - q)):
                    if w > 0.0:
                        t = slot_transition(i, j, a1, a2, use_res, params)
                        P[s, state_index(*t.state, params)] += p * w
            else:
                t = slot_transition(i, j, a1, a2, False, params)
                P[s, state_index(*t.state, params)] += p
    return P


def policy_power(params: SystemParams, policy: PolicyParams, pi: Sequence[float]) -> float:
    """Average RES power straight from its definition: sum over (i, 0) states."""
    _, mu1, mu2, _ = slot_probabilities(params.eta1, params.eta2)
    stride = params.Q2 + 1
    total = 0.0
    for i in range(params.Q1 + 1):
        rate = mu2 * policy.g[i] + (mu1 * policy.f[i] if i > 0 else 0.0)
        total += pi[i * stride] * rate
    return total
