"""Command-line entry point: ``eh-sched {solve,simulate,sweep,validate}``.

Exit codes: 0 success, 1 usage error, 2 infeasible budget, 3 failed
validation.  Output is one JSON document or an RFC 4180 CSV table, written
to stdout unless ``--output`` is given.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .model import CaseKind, PolicyParams, SystemParams, DEFAULT_Q1
from .policy import strict_threshold_policy
from .simulator import SimConfig, run
from .solver import CapacityWarning, InfeasibleError, solve
from .sweep import SWEEP_COLUMNS, pmax_grid, sweep
from .validate import FAULTS, run_validation

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_VALIDATION = 0, 1, 2, 3

SOLVE_CSV_COLUMNS = ("field", "i", "j", "value")
SIMULATE_CSV_COLUMNS = ("field", "i", "j", "value")
VALIDATE_CSV_COLUMNS = ("name", "passed", "residual", "tolerance", "detail")

# sparse outputs drop entries at or below this magnitude
NONZERO_TOL = 1e-15


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _json_value(x):
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _json_value(obj)


def _emit_json(doc, out) -> None:
    json.dump(_clean(doc), out, indent=2, allow_nan=False)
    out.write("\n")


def _emit_csv(header: Sequence[str], rows: Iterable[Sequence], out) -> None:
    w = csv.writer(out, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else v for v in r])


def _params(args, pmax: float = 0.0) -> SystemParams:
    return SystemParams(
        eta1=args.eta1, eta2=args.eta2, k1=args.k1, k2=args.k2,
        Q1=args.q1, Q2=args.q2, pmax=pmax,
    )


def _params_dict(p: SystemParams) -> dict:
    return {
        "eta1": p.eta1, "eta2": p.eta2, "k1": p.k1, "k2": p.k2,
        "Q1": p.Q1, "Q2": p.Q2, "pmax": p.pmax, "case": p.case.value,
    }


def _sparse_grid(grid) -> List[dict]:
    rows = []
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            v = float(grid[i, j])
            if abs(v) > NONZERO_TOL:
                rows.append({"i": i, "j": j, "p": v})
    return rows


def _solve_quiet(params: SystemParams):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CapacityWarning)
        sol = solve(params)
    return sol, [str(w.message) for w in caught if issubclass(w.category, CapacityWarning)]


def cmd_solve(args, out) -> int:
    params = _params(args, args.pmax)
    sol, notes = _solve_quiet(params)
    for n in notes:
        print(f"warning: {n}", file=sys.stderr)
    i_star = "inf" if sol.unbounded else sol.i_star
    pi = _sparse_grid(sol.pi_star.grid)
    if args.format == "json":
        _emit_json(
            {
                "params": _params_dict(params),
                "i_star": i_star,
                "delay": sol.delay,
                "power": sol.power,
                "thresholds": list(sol.thresholds),
                "g": list(sol.policy.g),
                "f": list(sol.policy.f),
                "pi": pi,
                "warnings": notes,
            },
            out,
        )
    else:
        rows = [("i_star", None, None, i_star), ("delay", None, None, sol.delay), ("power", None, None, sol.power)]
        rows += [("threshold", m, None, v) for m, v in enumerate(sol.thresholds)]
        rows += [("g", i, None, v) for i, v in enumerate(sol.policy.g)]
        rows += [("f", i, None, v) for i, v in enumerate(sol.policy.f)]
        rows += [("pi", e["i"], e["j"], e["p"]) for e in pi]
        _emit_csv(SOLVE_CSV_COLUMNS, rows, out)
    return EXIT_OK


def _sim_config(args) -> SimConfig:
    return SimConfig(
        seed=args.seed,
        horizon=args.slots,
        burn_in=args.burnin,
        initial_state=tuple(args.initial) if getattr(args, "initial", None) else (0, 0),
    )


def cmd_simulate(args, out) -> int:
    if (args.pmax is None) == (args.threshold is None):
        raise UsageError("give exactly one of --pmax (optimal policy) or --threshold")
    if args.pmax is not None:
        params = _params(args, args.pmax)
        sol, notes = _solve_quiet(params)
        policy: PolicyParams = sol.policy
        analytic = {"i_star": "inf" if sol.unbounded else sol.i_star, "delay": sol.delay, "power": sol.power}
    else:
        params = _params(args)
        policy = strict_threshold_policy(params, args.threshold)
        notes, analytic = [], None
    for n in notes:
        print(f"warning: {n}", file=sys.stderr)
    r = run(params, policy, _sim_config(args))
    summary = {
        "slots": r.slots,
        "mean_queue": r.mean_queue,
        "empirical_delay": r.empirical_delay,
        "delay_stderr": r.delay_stderr,
        "empirical_power": r.empirical_power,
        "power_stderr": r.power_stderr,
        "max_q1": r.max_q1,
        "drops": r.drops,
        "interior_occupancy": r.interior_occupancy,
        "arrival_rate": r.arrival_rate,
    }
    occupancy = _sparse_grid(r.occupancy)
    if args.format == "json":
        _emit_json(
            {
                "params": _params_dict(params),
                "seed": args.seed,
                "policy_threshold": policy.threshold,
                "analytic": analytic,
                **summary,
                "occupancy": occupancy,
            },
            out,
        )
    else:
        rows = [(k, None, None, v) for k, v in summary.items()]
        if analytic is not None:
            rows += [(f"analytic_{k}", None, None, v) for k, v in analytic.items()]
        rows += [("occupancy", e["i"], e["j"], e["p"]) for e in occupancy]
        _emit_csv(SIMULATE_CSV_COLUMNS, rows, out)
    return EXIT_OK


def _parse_grid(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --pmax-grid value: {exc}") from None
    if not values:
        raise UsageError("--pmax-grid is empty")
    return values


def cmd_sweep(args, out) -> int:
    params = _params(args)
    if args.pmax_grid is not None:
        grid = _parse_grid(args.pmax_grid)
    else:
        grid = pmax_grid(params, args.steps, args.grid_min, args.grid_max)
    sim = _sim_config(args) if args.simulate else None
    rows = sweep(params, grid, simulate=sim, jobs=args.jobs)
    dicts = [r.as_dict() for r in rows]
    if args.format == "json":
        _emit_json({"params": _params_dict(params), "columns": list(SWEEP_COLUMNS), "rows": dicts}, out)
    else:
        _emit_csv(SWEEP_COLUMNS, ([_json_value(d[c]) for c in SWEEP_COLUMNS] for d in dicts), out)
    failed = [r for r in rows if not r.ok]
    for r in failed:
        print(f"warning: pmax={r.pmax}: {r.error}", file=sys.stderr)
    return EXIT_INFEASIBLE if failed else EXIT_OK


_CASE_FLAGS = {"1": CaseKind.I, "2": CaseKind.II, "3": CaseKind.III}


def cmd_validate(args, out) -> int:
    cases = [_CASE_FLAGS[c] for c in args.case] if args.case else None

    def progress(r):
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark} {r.name}: residual {r.residual:.3e} (tol {r.tolerance:.1e}) {r.detail}", file=sys.stderr)

    results = run_validation(
        cases=cases, grid=args.grid, policies=args.policies, slots=args.slots,
        seed=args.seed, fault=args.inject_fault, progress=progress,
    )
    ok = all(r.passed for r in results)
    if args.format == "json":
        _emit_json({"passed": ok, "checks": [r.as_dict() for r in results]}, out)
    else:
        _emit_csv(VALIDATE_CSV_COLUMNS, ([getattr(r, c) for c in VALIDATE_CSV_COLUMNS] for r in results), out)
    return EXIT_OK if ok else EXIT_VALIDATION


def _system_flags(p: argparse.ArgumentParser, pmax: str) -> None:
    p.add_argument("--eta1", type=float, required=True, help="data-batch arrival probability per slot")
    p.add_argument("--eta2", type=float, required=True, help="energy-batch arrival probability per slot")
    p.add_argument("--k1", type=int, default=1, help="data packets per arrival (default 1)")
    p.add_argument("--k2", type=int, default=1, help="energy packets per harvest (default 1)")
    p.add_argument("--q1", type=int, default=DEFAULT_Q1, help=f"data-queue capacity (default {DEFAULT_Q1})")
    p.add_argument("--q2", type=int, default=1, help="battery capacity in energy packets (default 1)")
    if pmax == "required":
        p.add_argument("--pmax", type=float, required=True, help="average RES power budget, fraction of slots")
    elif pmax == "optional":
        p.add_argument("--pmax", type=float, help="average RES power budget; simulates the optimal policy")


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slots", type=int, default=1_000_000, help="simulated slots including burn-in")
    p.add_argument("--burnin", type=int, default=10_000)


def _output_flags(p: argparse.ArgumentParser, default: str) -> None:
    p.add_argument("--format", choices=("json", "csv"), default=default)
    p.add_argument("--output", metavar="PATH", help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eh-sched", description="Delay-optimal scheduling for energy-harvesting links with a reliable backup source.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="optimal threshold, delay, power and policy")
    _system_flags(p, "required")
    _output_flags(p, "json")

    p = sub.add_parser("simulate", help="Monte Carlo run of the optimal or a strict-threshold policy")
    _system_flags(p, "optional")
    p.add_argument("--threshold", type=int, help="simulate the strict threshold policy with this threshold")
    p.add_argument("--initial", type=int, nargs=2, metavar=("Q1_LEN", "Q2_LEN"), help="initial queue lengths")
    _sim_flags(p)
    _output_flags(p, "json")

    p = sub.add_parser("sweep", help="delay-power curve over a grid of budgets")
    _system_flags(p, "none")
    p.add_argument("--pmax-grid", help="comma-separated budgets")
    p.add_argument("--grid-min", type=float, help="lower end of the budget range (default: stability edge or 0)")
    p.add_argument("--grid-max", type=float, help="upper end of the budget range (default: first power threshold)")
    p.add_argument("--steps", type=int, default=20, help="grid points strictly inside the range")
    p.add_argument("--simulate", action="store_true", help="also simulate every point")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers (default $EH_SCHED_JOBS or 1)")
    _sim_flags(p)
    _output_flags(p, "csv")

    p = sub.add_parser("validate", help="run the built-in consistency checks")
    p.add_argument("--case", action="append", choices=sorted(_CASE_FLAGS), help="restrict to a case; repeatable")
    p.add_argument("--grid", type=int, default=50, help="closed-form agreement points")
    p.add_argument("--policies", type=int, default=200, help="random policies per identity check")
    p.add_argument("--slots", type=int, default=1_000_000, help="simulation length; 0 skips it")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", choices=FAULTS, help="corrupt a coefficient to confirm the checks bite")
    _output_flags(p, "json")
    return parser


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    buf = io.StringIO()
    try:
        code = COMMANDS[args.command](args, buf)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = buf.getvalue()
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
