"""Slot-level Monte Carlo of the harvesting transmitter.

Each slot draws a data arrival, an energy arrival and one policy coin from
three independent substreams spawned from a single seed, then applies the
scheduling rule of :func:`eh_sched.model.slot_transition`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .model import PolicyParams, SystemParams, res_probability, slot_transition

_CHUNK = 1 << 16
_BATCHES = 20


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    horizon: int = 1_000_000
    burn_in: int = 10_000
    initial_state: Tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not (0 <= self.burn_in < self.horizon):
            raise ValueError(f"burn_in={self.burn_in} must lie in [0, horizon={self.horizon})")
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")


@dataclass(frozen=True)
class SimResult:
    """Statistics over the slots after burn-in.

    ``occupancy`` has shape ``(Q1 + 1, Q2 + 1)`` and counts the state at the
    end of each measured slot.  Standard errors come from batch means.
    """

    slots: int
    mean_queue: float
    empirical_delay: float
    empirical_power: float
    occupancy: np.ndarray
    max_q1: int
    drops: int
    interior_occupancy: float
    arrival_rate: float
    delay_stderr: float
    power_stderr: float


@dataclass(frozen=True)
class StepResult:
    state: Tuple[int, int]
    served: bool
    res_used: bool
    dropped: int


def step(
    state: Tuple[int, int],
    arrivals: Tuple[int, int],
    policy: PolicyParams,
    draw: float,
    params: SystemParams,
) -> StepResult:
    """Advance one slot; ``draw`` in [0, 1) decides the RES coin."""
    i, j = state
    a1, a2 = arrivals
    use_res = draw < res_probability(i, a1, policy)
    t = slot_transition(i, j, a1, a2, use_res, params)
    return StepResult(t.state, t.served, t.res_used, t.dropped)


def _streams(seed: int):
    children = np.random.SeedSequence(seed).spawn(3)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def _batch_stderr(sums, sizes) -> float:
    means = np.asarray(sums, float) / np.asarray(sizes, float)
    if means.size < 2:
        return math.nan
    return float(means.std(ddof=1) / math.sqrt(means.size))


def run(params: SystemParams, policy: PolicyParams, config: SimConfig = SimConfig()) -> SimResult:
    policy.check_length(params)
    Q1, Q2, k1, k2 = params.Q1, params.Q2, params.k1, params.k2
    i, j = config.initial_state
    if not (0 <= i <= Q1 and 0 <= j <= Q2):
        raise ValueError(f"initial state {config.initial_state} outside capacities")
    data_rng, energy_rng, coin_rng = _streams(config.seed)
    g, f = policy.g, policy.f
    stride = Q2 + 1
    occ = [0] * ((Q1 + 1) * stride)

    measured = config.horizon - config.burn_in
    batch = max(1, measured // _BATCHES)
    q_sums, p_sums, sizes = [], [], []
    q_acc = p_acc = n_acc = 0
    res_total = arrivals = drops = interior = 0
    max_q1 = 0
    t = 0
    while t < config.horizon:
        n = min(_CHUNK, config.horizon - t)
        d_arr = (data_rng.random(n) < params.eta1).tolist()
        e_arr = (energy_rng.random(n) < params.eta2).tolist()
        coins = coin_rng.random(n).tolist()
        for s in range(n):
            a1 = k1 if d_arr[s] else 0
            energy = j + k2 if e_arr[s] else j
            if energy > Q2:
                energy = Q2
            backlog = i + a1
            res = False
            if backlog > 0:
                if energy > 0:
                    energy -= 1
                    backlog -= 1
                elif coins[s] < (g[i] if a1 else f[i]):
                    res = True
                    backlog -= 1
            lost = 0
            if backlog > Q1:
                lost = backlog - Q1
                backlog = Q1
            i, j = backlog, energy
            if t + s >= config.burn_in:
                occ[i * stride + j] += 1
                q_acc += i
                n_acc += 1
                if res:
                    p_acc += 1
                    res_total += 1
                if a1:
                    arrivals += 1
                if lost:
                    drops += lost
                if i > max_q1:
                    max_q1 = i
                if i and j:
                    interior += 1
                if n_acc == batch:
                    q_sums.append(q_acc)
                    p_sums.append(p_acc)
                    sizes.append(n_acc)
                    q_acc = p_acc = n_acc = 0
        t += n
    if n_acc:
        q_sums.append(q_acc)
        p_sums.append(p_acc)
        sizes.append(n_acc)

    rate = k1 * params.eta1
    mean_queue = sum(q_sums) / measured
    delay = mean_queue / rate if rate > 0 else math.nan
    delay_se = _batch_stderr(q_sums, sizes)
    occupancy = np.array(occ, dtype=float).reshape(Q1 + 1, stride) / measured
    occupancy.setflags(write=False)
    return SimResult(
        slots=measured,
        mean_queue=mean_queue,
        empirical_delay=delay,
        empirical_power=res_total / measured,
        occupancy=occupancy,
        max_q1=max_q1,
        drops=drops,
        interior_occupancy=interior / measured,
        arrival_rate=k1 * arrivals / measured,
        delay_stderr=delay_se / rate if rate > 0 else math.nan,
        power_stderr=_batch_stderr(p_sums, sizes),
    )
