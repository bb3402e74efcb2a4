"""Command line entry point: ``radialpme constants|run|sweep|verify``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..constants import ParameterError, exponent_table
from ..geometry import ModelManifold
from .acceptance import verify_all
from .config import ConfigError, load_config
from .experiment import OUT_DIR_ENV, SWEEP_PARAMS, default_out_dir, parse_values, run_experiment, run_sweep


def _common(p: argparse.ArgumentParser):
    p.add_argument("--out-dir", type=Path, default=None,
                   help=f"output directory (default: ${OUT_DIR_ENV} or ./radialpme-out)")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="time-series file format")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized checks (recorded in manifests)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radialpme", description="Radial porous-medium reaction-diffusion experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constants", help="print exponents and smallness thresholds")
    c.add_argument("--m", type=float, default=2.0)
    c.add_argument("--p", type=float, default=3.0)
    c.add_argument("--N", type=int, default=3)
    c.add_argument("--r", type=float, default=2.0, help="integrability exponent r > N/2")
    c.add_argument("--q", type=float, default=4.0)
    c.add_argument("--kind", default="euclidean", choices=("euclidean", "hyperbolic", "weighted_euclidean"))
    c.add_argument("--c", type=float, default=1.0, help="hyperbolic curvature")
    c.add_argument("--a", type=float, default=0.0, help="weight decay")
    c.add_argument("--C-s", dest="C_s", type=float, default=None)
    c.add_argument("--C-p", dest="C_p", type=float, default=None)
    _common(c)

    r = sub.add_parser("run", help="run one configured experiment")
    r.add_argument("--config", type=Path, required=True)
    r.add_argument("--dry-run", action="store_true", help="validate and print the exponent table only")
    _common(r)

    s = sub.add_parser("sweep", help="run a parameter sweep and compare adjacent runs")
    s.add_argument("--config", type=Path, required=True)
    s.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    s.add_argument("--values", required=True, help="comma-separated, strictly increasing (\"inf\" allowed for k)")
    s.add_argument("--workers", type=int, default=1)
    _common(s)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--profile", choices=("quick", "full"), default="quick")
    _common(v)
    return parser


def _cmd_constants(args) -> int:
    manifold = ModelManifold(args.kind, args.N, curvature=args.c, decay=args.a,
                             sobolev_constant=args.C_s, poincare_constant=args.C_p)
    table = exponent_table(args.m, args.p, args.N, args.r, args.q, manifold.sobolev_constant,
                           manifold.poincare_constant)
    print(json.dumps(table.to_dict(), indent=2, default=str))
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config)
    formats = (args.format,) if args.format else None
    res = run_experiment(config, out_dir=args.out_dir, formats=formats, seed=args.seed, dry_run=args.dry_run)
    return 0 if res.passed else 1


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    out = args.out_dir or config.output.directory or default_out_dir()
    rep = run_sweep(config, args.param, parse_values(args.values), workers=args.workers, out_dir=out)
    for c in rep.comparisons:
        print(c.summary())
    print("successive sup differences: " + ", ".join(f"{d:.3e}" for d in rep.differences))
    if rep.message:
        print(rep.message)
    print(f"sweep over {args.param}: {'PASS' if rep.passed else 'FAIL'}; report in {out}")
    return 0 if rep.passed else 1


def _cmd_verify(args) -> int:
    out = args.out_dir if args.out_dir is not None else (default_out_dir() if args.profile == "full" else None)
    passed, _ = verify_all(args.profile, out_dir=out, seed=args.seed)
    return 0 if passed else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"constants": _cmd_constants, "run": _cmd_run, "sweep": _cmd_sweep, "verify": _cmd_verify}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (ParameterError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
