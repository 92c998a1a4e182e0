"""Command line entry point (``comphomog``).

Exit codes: 0 success, 2 configuration error, 3 solver error.
"""
import argparse
import sys
import warnings

from . import experiments as ex
from .config import bundled_names, load_config
from .errors import ConfigError, InvalidArgument, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

SUBCOMMAND_MODES = {
    "cell": "cell",
    "simulate": "eps",
    "stefan": "stefan",
    "compare": "compare",
    "sweep": "sweep",
}


def _parser():
    p = argparse.ArgumentParser(
        prog="comphomog",
        description="Competition-diffusion with oscillating diffusivity: "
                    "eps-problem, cell problems and the enthalpy limit.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("cell", "print homogenized tensors of A and B"),
        ("simulate", "run the eps-problem and write snapshots and CSVs"),
        ("stefan", "run the homogenized enthalpy problem"),
        ("compare", "L2 distance between eps and enthalpy solutions over time"),
        ("sweep", "eps sweep (front, segregation, L2 distance)"),
    ]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True,
                        help=f"config file or bundled name ({', '.join(bundled_names())})")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. params.eps=2e-3")
        sp.add_argument("--output", help="output directory (same as --set run.output=...)")
        sp.add_argument("--quiet-warnings", action="store_true",
                        help="suppress mesh resolution warnings")
    fp = sub.add_parser("front", help="front curves and velocities from snapshot files")
    fp.add_argument("directory")
    fp.add_argument("--csv", help="write t,x2,front_x1,velocity rows to this file")
    sub.add_parser("configs", help="list bundled configurations")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "configs":
            print("\n".join(bundled_names()))
            return EXIT_OK
        if args.command == "front":
            return _front(args)
        overrides = list(args.set)
        if args.output:
            overrides.append(f"run.output={args.output}")
        overrides.append(f"run.mode={SUBCOMMAND_MODES[args.command]}")
        cfg = load_config(args.config, overrides)
        with warnings.catch_warnings():
            if args.quiet_warnings:
                warnings.simplefilter("ignore")
            result = ex.run_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, InvalidArgument) as exc:
        when = f" at t={exc.t:g}" if getattr(exc, "t", None) is not None else ""
        print(f"solver error{when}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(result.summary)
    return EXIT_OK


def _front(args):
    curves = ex.fronts_from_snapshots(args.directory)
    rows = []
    for c in curves:
        rows.extend((c.t, a, b, vel) for a, b, vel in zip(c.x2, c.x1, c.velocity))
        print(f"t={c.t:.6g} front={ex.front_summary(c)}")
    if args.csv:
        ex.write_csv(args.csv, ex.FRONT_COLUMNS + ["velocity"], rows)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
