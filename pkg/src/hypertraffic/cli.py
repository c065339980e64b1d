"""Command-line front end for the simulator.

Subcommands mirror the experiment runners; every run is deterministic for a
given --seed and writes plain CSV with a fixed column order and floats at 17
significant digits. Failures exit nonzero after printing one machine-readable
line (error kind=<type> msg="...") to stderr.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .cognition import hne_gap_sweep
from .game import make_game, solve_games
from .harness import (
    OFFLINE_FIELDS,
    ONLINE_FIELDS,
    SUCCESS_FIELDS,
    TIMING_FIELDS,
    StagePlan,
    write_csv,
)
from .scenario import (
    default_offline_scenario,
    default_online_scenario,
    success_study_scenario,
    load_config_file,
)


def _scenario_from(args, default_builder):
    if getattr(args, "config", None):
        return load_config_file(args.config)
    return default_builder()


def _parse_stds(text):
    """Either a comma list ("0.05,0.1") or a start:stop:step range, stop
    inclusive up to rounding."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3:
            raise ValueError("range form is start:stop:step")
        start, stop, step = parts
        if step <= 0:
            raise ValueError("step must be positive")
        count = int(round((stop - start) / step))
        return [round(start + i * step, 10) for i in range(count + 1)]
    return [float(p) for p in text.split(",") if p.strip()]


def _cmd_solve(args):
    scenario = _scenario_from(args, default_offline_scenario)
    weights = {v.vid: v.weights_true for v in scenario.vehicles}
    game = make_game(scenario, weights)
    result = solve_games(game)
    print(f"converged={result.converged} iterations={result.iterations} "
          f"violation={result.max_violation:.3e} degraded={result.degraded}")
    for vid in sorted(result.gaps):
        print(f"player {vid}: objective={result.objectives[vid]:.6f} "
              f"gap={result.gaps[vid]:.3e}")
    if args.out:
        rows = []
        for vid in sorted(result.strategies):
            strat = result.strategies[vid]
            for k, state in zip(
                strat.segment.decision_points(), strat.states()
            ):
                rows.append(
                    {
                        "player": vid,
                        "step": k,
                        "p_x": state[0],
                        "p_y": state[1],
                        "v": state[2],
                        "psi": state[3],
                    }
                )
        write_csv(args.out, ("player", "step", "p_x", "p_y", "v", "psi"), rows)
        print(f"wrote {args.out}")
    if not result.converged:
        raise RuntimeError("best-response iteration did not converge")
    return 0


def _cmd_interpret_offline(args):
    scenario = _scenario_from(args, default_offline_scenario)
    stds = [args.noise_std if args.noise_std is not None else scenario.noise_std]
    rows = harness.run_offline_experiment(scenario, stds, args.reps, args.seed)
    if args.out:
        write_csv(args.out, OFFLINE_FIELDS, rows)
        print(f"wrote {args.out}")
    finished = [r for r in rows if not r.get("failure")]
    if not finished:
        raise RuntimeError(f"all repetitions failed: {rows[0].get('failure')}")
    errs = sorted(r["parameter_estimation_error"] for r in finished)
    print(f"reps={len(finished)} median_parameter_error={errs[len(errs) // 2]:.6f}")
    return 0


def _cmd_run_online(args):
    scenario = _scenario_from(args, default_online_scenario)
    rows = harness.run_online_experiment(scenario, repetitions=args.reps, seed=args.seed)
    if args.out:
        write_csv(args.out, ONLINE_FIELDS, rows)
        print(f"wrote {args.out}")
    plan = StagePlan.from_scenario(scenario)
    for t in range(1, plan.count + 1):
        errs = sorted(
            r["parameter_error"]
            for r in rows
            if r["stage"] == t and not r.get("failure")
        )
        if errs:
            print(f"stage {t}: reps={len(errs)} "
                  f"median_parameter_error={errs[len(errs) // 2]:.6f}")
    return 0


def _cmd_sweep_noise(args):
    scenario = _scenario_from(args, default_offline_scenario)
    stds = _parse_stds(args.stds)
    rows = harness.run_offline_experiment(scenario, stds, args.reps, args.seed)
    write_csv(args.out, OFFLINE_FIELDS, rows)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _cmd_success_rate(args):
    scenario = _scenario_from(args, success_study_scenario)
    rows = harness.run_success_rate(scenario, args.mode, args.reps, args.seed)
    if args.out:
        write_csv(args.out, SUCCESS_FIELDS, rows)
        print(f"wrote {args.out}")
    overall = rows[-1]
    print(f"mode={args.mode} reps={overall['count']} "
          f"success_rate={overall['success_rate']:.4f}")
    return 0


def _cmd_timing(args):
    scenario = _scenario_from(args, default_online_scenario)
    rows = harness.run_timing(scenario, repetitions=args.reps, seed=args.seed)
    write_csv(args.out, TIMING_FIELDS, rows)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _cmd_gap_sweep(args):
    scenario = _scenario_from(args, default_offline_scenario)
    sweep = hne_gap_sweep(scenario)
    for eps_c, gap in sweep.rows:
        print(f"eps_c={eps_c:.6f} hv_gap={gap:.6e}")
    print(f"slope={sweep.slope:.6e} intercept={sweep.intercept:.6e}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hypertraffic",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, reps_default):
        p.add_argument("--config", help="scenario YAML; defaults to the built-in study")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--reps", type=int, default=reps_default)
        p.add_argument("--out", help="CSV output path")

    p = sub.add_parser("solve", help="solve one forward game with true weights")
    common(p, 1)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser(
        "interpret-offline",
        help="full-horizon observe/interpret/predict round trip",
        epilog="CSV columns: " + ", ".join(OFFLINE_FIELDS),
    )
    common(p, 1)
    p.add_argument("--noise-std", type=float, default=None,
                   help="observation noise std in metres (default: scenario value)")
    p.set_defaults(func=_cmd_interpret_offline)

    p = sub.add_parser(
        "run-online",
        help="staged online interpretation and planning",
        epilog="CSV columns: " + ", ".join(ONLINE_FIELDS),
    )
    common(p, 50)
    p.set_defaults(func=_cmd_run_online)

    p = sub.add_parser(
        "sweep-noise",
        help="offline noise sweep",
        epilog="CSV columns: " + ", ".join(OFFLINE_FIELDS),
    )
    common(p, 50)
    p.add_argument("--stds", default="0.01:0.40:0.01",
                   help="comma list or start:stop:step range of noise stds")
    p.set_defaults(func=_cmd_sweep_noise)
    for action in p._actions:
        if action.dest == "out":
            action.required = True

    p = sub.add_parser(
        "success-rate",
        help="success-rate study",
        epilog="CSV columns: " + ", ".join(SUCCESS_FIELDS),
    )
    common(p, 100)
    p.add_argument("--mode", choices=("with_interpretation", "random_cognition"),
                   default="with_interpretation")
    p.set_defaults(func=_cmd_success_rate)

    p = sub.add_parser(
        "timing",
        help="per-stage distributed vs centralized durations",
        epilog="CSV columns: " + ", ".join(TIMING_FIELDS),
    )
    common(p, 10)
    p.set_defaults(func=_cmd_timing)
    for action in p._actions:
        if action.dest == "out":
            action.required = True

    p = sub.add_parser("gap-sweep",
                       help="human-side equilibrium gap versus cognitive mismatch")
    common(p, 1)
    p.set_defaults(func=_cmd_gap_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        msg = str(exc).replace('"', "'")
        print(f'error kind={type(exc).__name__} msg="{msg}"', file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
