"""Command-line entry point: ``cwtune {run,sweep,compare,analytic,solve}``."""

from __future__ import annotations

import argparse
import sys
from typing import Any, Sequence

import numpy as np

from cwtune import ParameterError
from cwtune.analytic import StationParams, evaluate_transformed_model
from cwtune.fairness import solve_proportional_fair
from cwtune.harness import compare, read_summary, run_scenario, summarize, sweep
from cwtune.kw import CW_MAX, CW_MIN
from cwtune.scenario import (POLICIES, ScenarioSpec, apply_overrides, build_scenario,
                             bundled_scenarios, load_raw)


def parse_value(text: str) -> Any:
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _assignments(items: Sequence[str]) -> dict[str, Any]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ParameterError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = parse_value(value.strip())
    return out


def _overrides(args) -> dict[str, Any]:
    o = dict(policy=args.policy, seed=args.seed, duration=args.duration,
             coordination=args.coordination, utility=args.utility)
    o.update(_assignments(args.set or []))
    return o


def _raw(args) -> dict:
    return apply_overrides(load_raw(args.scenario), **_overrides(args))


def _spec(args) -> ScenarioSpec:
    return build_scenario(_raw(args), args.scenario)


def _print(d: dict[str, Any]) -> None:
    for k, v in d.items():
        print(f"{k} = {v}")


def _station_params(spec: ScenarioSpec) -> list[StationParams]:
    return [StationParams.from_frame(i, s.frame, spec.timing, s.p_n) for i, s in enumerate(spec.stations)]


def cmd_run(args) -> int:
    result = run_scenario(_spec(args), args.out, with_trace=not args.no_trace)
    _print(summarize(result))
    return 0


def cmd_sweep(args) -> int:
    values = [parse_value(v) for v in args.values.split(",") if v.strip()]
    rows = sweep(_raw(args), args.parameter, values, args.out, workers=args.workers,
                 with_trace=not args.no_trace)
    for value, s in rows:
        print(f"{args.parameter}={value}: utility = {s['utility']:.4f}  "
              f"total_throughput_bps = {s['total_throughput_bps']:.1f}")
    if args.parameter == "seed" and len(rows) > 1:
        u = np.array([s["utility"] for _, s in rows])
        print(f"utility mean = {u.mean():.4f} spread = {u.std():.4f}")
    return 0


def cmd_compare(args) -> int:
    _print(compare(read_summary(args.run_a), read_summary(args.run_b)))
    return 0


def cmd_analytic(args) -> int:
    spec = _spec(args)
    cws = [int(c) for c in args.cw.split(",")] if args.cw else [s.cw for s in spec.stations]
    if len(cws) != len(spec.stations):
        raise ParameterError(f"--cw lists {len(cws)} values for {len(spec.stations)} stations")
    lam = np.array([2.0 / (c + 1.0) for c in cws])
    out = evaluate_transformed_model(_station_params(spec), lam, spec.timing)
    for i, c in enumerate(cws):
        print(f"station {i}: cw = {c} throughput_bps = {out.throughput[i]:.1f} "
              f"airtime_share = {out.airtime_share[i]:.6f} p_collision = {out.p_collision[i]:.6f}")
    print(f"total_throughput_bps = {out.throughput.sum():.1f}")
    print(f"utility = {np.sum(np.log(out.throughput)):.6f}")
    return 0


def cmd_solve(args) -> int:
    spec = _spec(args)
    sol = solve_proportional_fair(_station_params(spec), spec.timing, bounds=(args.cw_min, args.cw_max))
    for i in range(len(spec.stations)):
        print(f"station {i}: cw_star = {sol.cw_star[i]:.3f} airtime_share = {sol.airtime_star[i]:.6f} "
              f"throughput_bps = {sol.throughput_star[i]:.1f}")
    print(f"utility = {sol.utility_star:.6f}")
    print(f"stationarity_residual = {sol.stationarity_residual:.3e}")
    print(f"converged = {sol.converged}")
    return 0


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, help="scenario file, or name of a bundled one")
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float, help="simulated seconds")
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--coordination", choices=("coordinated", "slotted", "uncoordinated"))
    p.add_argument("--utility", choices=("local", "global"))
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a dotted parameter, e.g. learning.tau=0.05 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cwtune", description="Contention window learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    _scenario_flags(p)
    p.add_argument("--out", help="output directory for CSVs and summary.txt")
    p.add_argument("--no-trace", action="store_true", help="skip the per-transmission trace.csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="one run per value of a parameter")
    _scenario_flags(p)
    p.add_argument("--parameter", required=True, help="dotted parameter, e.g. learning.tau or seed")
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--out", help="root output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-trace", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="ratios and deltas between two run directories")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analytic", help="evaluate the saturation model at fixed CWs")
    _scenario_flags(p)
    p.add_argument("--cw", help="comma separated CW per station (default: station cw fields)")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("solve", help="proportional-fair CW allocation from the model")
    _scenario_flags(p)
    p.add_argument("--cw-min", type=float, default=CW_MIN)
    p.add_argument("--cw-max", type=float, default=CW_MAX)
    p.set_defaults(func=cmd_solve)

    sub.add_parser("list", help="list bundled scenarios").set_defaults(
        func=lambda args: print("\n".join(bundled_scenarios())) or 0)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
