"""Command-line entry point.

Exit codes: 0 success, 2 invalid config/input, 3 window overflow,
4 numerical blow-up, 5 fit failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__, scenarios
from .errors import CBHOError

log = logging.getLogger("cbho")

EXIT_OK = 0


def _angle(text: str) -> float:
    """Accept plain radians or expressions like 'pi/2', '-pi/2'."""
    t = text.strip().lower().replace(" ", "")
    sign = -1.0 if t.startswith("-") else 1.0
    t = t.lstrip("+-")
    if "pi" in t:
        num, _, den = t.partition("/")
        factor = num.replace("*", "").replace("pi", "") or "1"
        return sign * float(factor) * math.pi / (float(den) if den else 1.0)
    return sign * float(t)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dt", type=float, help="time step (hbar/E_R)")
    p.add_argument("--t-end", type=float, help="horizon (hbar/E_R)")
    p.add_argument("--phi", type=_angle, help="drive phase in radians (accepts e.g. -pi/2)")
    p.add_argument("--alpha", type=float, help="drive amplitude K_D/K0")
    p.add_argument("--out-dir", type=Path, default=None, help="output directory")
    p.add_argument("--snapshots", action="store_true", help="write density snapshot matrices")
    p.add_argument("--seedless", action="store_true",
                   help="no-op: every run is deterministic and uses no random numbers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbho", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a preset, config file or manifest")
    p.add_argument("target", help=f"preset ({', '.join(scenarios.preset_names())}), config file or run dir")
    _add_run_flags(p)

    p = sub.add_parser("sweep", help="run a parameter sweep from a spec file")
    p.add_argument("spec")
    _add_run_flags(p)
    p.add_argument("--parallelism", type=int, default=None)

    p = sub.add_parser("fit", help="fit the slow harmonic oscillation of a run")
    p.add_argument("run_dir", type=Path)

    p = sub.add_parser("compare", help="compare a run's group velocity with the semiclassical models")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--delta-n", type=float, help="fallback amplitude if the fit fails")
    p.add_argument("--delta-omega", type=float, help="fallback slow frequency if the fit fails")
    p.add_argument("--gamma", type=_angle, default=0.0, help="fallback slow phase")

    p = sub.add_parser("semiclassical", help="integrate the local acceleration model")
    p.add_argument("target")
    _add_run_flags(p)
    p.add_argument("--ode-dt", type=float, default=None)

    sub.add_parser("presets", help="list presets")
    return parser


def _scenario(args):
    s = scenarios.load_scenario(args.target)
    return scenarios.with_cli_overrides(s, dt=args.dt, t_end=args.t_end, phi=args.phi, alpha=args.alpha,
                                        snapshots=args.snapshots or None)


def _out_dir(args, default_name: str) -> Path:
    return args.out_dir if args.out_dir is not None else Path("runs") / default_name


def cmd_run(args) -> int:
    s = _scenario(args)
    out = _out_dir(args, s.name)
    preset_name = args.target if args.target in scenarios.preset_names() else None
    log.info("running %s -> %s (%d steps)", s.name, out, s.integrator.n_steps)
    scenarios.run_scenario(s, out, preset_name=preset_name)
    print(out / "manifest.json")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = scenarios.load_sweep(args.spec)
    base = scenarios.with_cli_overrides(spec.base, dt=args.dt, t_end=args.t_end, phi=args.phi, alpha=args.alpha,
                                        snapshots=args.snapshots or None)
    spec = scenarios.SweepSpec(base, spec.axis, spec.values, args.parallelism or spec.parallelism)
    out = _out_dir(args, f"sweep_{spec.axis.replace('.', '_')}")
    rows = scenarios.run_sweep(spec, out)
    failed = sum(1 for r in rows if r["exit_code"] != 0)
    print(out / "summary.csv")
    if failed:
        log.warning("%d of %d sweep points failed (see summary.csv)", failed, len(rows))
    return EXIT_OK


def cmd_fit(args) -> int:
    fit = scenarios.run_fit(args.run_dir)
    print(json.dumps({"delta_n": fit.delta_n, "delta_omega": fit.delta_omega, "gamma": fit.gamma,
                      "delta_F": fit.delta_F, "residual_rms": fit.residual_rms}, indent=2))
    return EXIT_OK


def cmd_compare(args) -> int:
    fallback = None
    if args.delta_n is not None and args.delta_omega is not None:
        fallback = {"delta_n": args.delta_n, "delta_omega": args.delta_omega, "gamma": args.gamma}
    cmp = scenarios.run_compare(args.run_dir, fallback)
    print(json.dumps(cmp.metrics, indent=2))
    return EXIT_OK


def cmd_semiclassical(args) -> int:
    s = _scenario(args)
    out = _out_dir(args, f"{s.name}_semiclassical")
    print(scenarios.run_semiclassical(s, out, dt=args.ode_dt))
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in scenarios.preset_names():
        s = scenarios.preset(name)
        tag = " (slow)" if name in scenarios.SLOW_PRESETS else ""
        print(f"{name:10s} phi={s.model.phi:+.4f} alpha={s.model.alpha:g} "
              f"t_end={s.integrator.t_end / s.bloch_period:g} T_B{tag}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "semiclassical": cmd_semiclassical,
    "presets": cmd_presets,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CBHOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
