"""Delay-power tradeoff curves over a grid of RES budgets."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np

from .model import SystemParams
from .simulator import SimConfig, run
from .solver import CapacityWarning, power_threshold, solve

JOBS_ENV = "EH_SCHED_JOBS"

SWEEP_COLUMNS = (
    "pmax",
    "i_star",
    "delay",
    "power",
    "sim_delay",
    "sim_delay_stderr",
    "sim_power",
    "sim_power_stderr",
    "warning",
    "error",
)


@dataclass(frozen=True)
class SweepRow:
    pmax: float
    i_star: Optional[int] = None
    delay: float = math.nan
    power: float = math.nan
    sim_delay: float = math.nan
    sim_delay_stderr: float = math.nan
    sim_power: float = math.nan
    sim_power_stderr: float = math.nan
    warning: str = ""
    error: str = ""
    unbounded: bool = False

    @property
    def ok(self) -> bool:
        return not self.error

    def as_dict(self) -> dict:
        d = asdict(self)
        d["i_star"] = "inf" if self.unbounded else self.i_star
        del d["unbounded"]
        return d


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def stability_edge(params: SystemParams) -> float:
    return params.k1 * params.eta1 - params.k2 * params.eta2


def pmax_grid(params: SystemParams, steps: int, lo: Optional[float] = None, hi: Optional[float] = None) -> List[float]:
    """``steps`` evenly spaced budgets strictly inside ``(lo, hi)``.

    Defaults span from the stability edge (or zero) up to the first power
    threshold, beyond which the delay is already zero.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    if lo is None:
        lo = max(stability_edge(params), 0.0)
    if hi is None:
        hi = power_threshold(params, 0)
    if not hi > lo:
        raise ValueError(f"empty budget range ({lo}, {hi})")
    return [float(x) for x in np.linspace(lo, hi, steps + 2)[1:-1]]


def _point(args) -> SweepRow:
    base, pmax, index, sim_config = args
    try:
        params = base.replace(pmax=pmax)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", CapacityWarning)
            sol = solve(params)
        note = "; ".join(str(w.message) for w in caught if issubclass(w.category, CapacityWarning))
        row = dict(
            pmax=params.pmax,
            i_star=sol.i_star,
            delay=sol.delay,
            power=sol.power,
            warning=note,
            unbounded=sol.unbounded,
        )
        if sim_config is not None:
            cfg = SimConfig(
                seed=int(np.random.SeedSequence([sim_config.seed, index]).generate_state(1, np.uint64)[0]),
                horizon=sim_config.horizon,
                burn_in=sim_config.burn_in,
                initial_state=sim_config.initial_state,
            )
            sim = run(params, sol.policy, cfg)
            row.update(
                sim_delay=sim.empirical_delay,
                sim_delay_stderr=sim.delay_stderr,
                sim_power=sim.empirical_power,
                sim_power_stderr=sim.power_stderr,
            )
        return SweepRow(**row)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return SweepRow(pmax=pmax, error=str(exc))


def sweep(
    params: SystemParams,
    grid: Sequence[float],
    simulate: Optional[SimConfig] = None,
    jobs: Optional[int] = None,
) -> List[SweepRow]:
    """Solve (and optionally simulate) every budget in ``grid``.

    A failing point becomes a row with ``error`` set; the rest still run.
    Each simulated point gets its own seed derived from ``simulate.seed`` and
    its grid index, so results do not depend on ``jobs``.
    """
    tasks = [(params, float(p), k, simulate) for k, p in enumerate(grid)]
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(tasks) < 2:
        return [_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_point, tasks))
