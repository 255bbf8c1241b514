"""Command line: ``run``, ``linearize`` and ``selftest``.

Exit status is 0 on success, 2 when a run completes but misses its
acceptance metrics (or a sweep finds an unstable trim), 1 on any error.
"""

import argparse
import sys
from dataclasses import replace

from .linearize import TrimError, parse_sweep, stability_sweep
from .output import emit_outputs
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="vtolflight",
                                description="Compound VTOL flight control simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write the log and metrics")
    run.add_argument("--scenario", required=True, help="scenario file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--duration", type=float, help="override the run length, s")
    run.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                     help="override one scenario key (repeatable)")

    lin = sub.add_parser("linearize", help="closed-loop eigenvalues over an airspeed sweep")
    lin.add_argument("--scenario", required=True)
    lin.add_argument("--airspeed-sweep", required=True, metavar="LO:STEP:HI")
    lin.add_argument("--airdata", choices=("ideal", "estimated"), default="ideal",
                     help="air velocity fed to the controller (default: ideal)")
    lin.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")

    sub.add_parser("selftest", help="run the built-in property checks")
    return p


def cmd_run(args):
    from .sim import run_scenario

    s = load_scenario(args.scenario, args.override)
    if args.seed is not None:
        s = replace(s, seed=args.seed)
    if args.duration is not None:
        s = replace(s, duration=args.duration)
    s.validate()
    res = run_scenario(s)
    emit_outputs(res.log, args.out, res.metrics)
    m = res.metrics
    print(f"phases: {m.get('phase_sequence', '')}")
    for key in ("altitude_dev_transition", "heading_err_transition_deg", "fw_airspeed_mean",
                "final_speed", "tracking_rms"):
        if key in m:
            print(f"{key} = {m[key]:.4g}")
    print(f"runtime {m['runtime_s']:.2f} s, outputs in {args.out}")
    if res.diverged:
        print(f"error: {res.message}", file=sys.stderr)
        return EXIT_ERROR
    if not m.get("acceptance_ok", False):
        print("acceptance metrics not met", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_linearize(args):
    s = load_scenario(args.scenario, args.override)
    speeds = parse_sweep(args.airspeed_sweep)
    models = stability_sweep(s, speeds, args.airdata)
    print(f"{'airspeed':>8}  {'phase':>5}  {'states':>6}  {'max Re':>11}  stable")
    stable = True
    for lm in models:
        mr = lm.max_real
        ok = mr < 0
        stable &= ok
        print(f"{lm.airspeed:8.2f}  {lm.setpoints.phase.name:>5}  {len(lm.labels):6d}  "
              f"{mr:11.4e}  {'yes' if ok else 'NO'}")
    return EXIT_OK if stable else EXIT_FAILED


def cmd_selftest(args):
    from .selftest import run_selftest

    results = run_selftest()
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAILED


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means a failed acceptance check
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    handler = {"run": cmd_run, "linearize": cmd_linearize, "selftest": cmd_selftest}
    try:
        return handler[args.command](args)
    except (ScenarioError, TrimError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
