"""
Command-line entry point::

    bbq run <config.yaml>
    bbq check [--seed S] [--inject-fault partition]
    bbq sweep <config.yaml>
    bbq analyze <run-dir> [--q-list 2,4,inf]
    bbq calibrate [--n 128]

Exit codes: 0 all checks pass, 1 a check failed, 2 the run blew up,
3 configuration or input-data error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from typing import List, Optional

from . import runner
from .errors import BBQError, ConfigError, DataError

log = logging.getLogger("bbq")


def _q_list(text: str) -> List[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        try:
            q = math.inf if part.lower() == "inf" else float(part)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad exponent {part!r}") from None
        if not q >= 2.0:
            raise argparse.ArgumentTypeError(f"exponents must lie in [2, inf], got {part}")
        out.append(q)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bbq", description="Damped Boussinesq spectral solver "
                                "with Littlewood-Paley diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="integrate one trajectory")
    r.add_argument("config")
    c = sub.add_parser("check", help="run the property suite")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--inject-fault", choices=("partition",), default=None,
                   help="corrupt a component to see the suite fail")
    s = sub.add_parser("sweep", help="boundary mapping over one parameter")
    s.add_argument("config")
    a = sub.add_parser("analyze", help="rebuild the report of a run directory")
    a.add_argument("directory")
    a.add_argument("--q-list", type=_q_list, default=None,
                   help="extra Besov exponents, comma separated (e.g. 2,4,inf)")
    k = sub.add_parser("calibrate", help="recompute C0 over the standard battery")
    k.add_argument("--n", type=int, default=128)
    return p


def _cmd_check(args) -> int:
    from .checks import run_suite

    results = run_suite(seed=args.seed, inject_fault=args.inject_fault)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"first failure: {failed[0].name}: {failed[0].detail}", file=sys.stderr)
        return runner.EXIT_FAIL
    return runner.EXIT_OK


def _cmd_calibrate(args) -> int:
    from .diagnostics import calibrate_c0
    from .spectral import GridSpec

    rep = calibrate_c0(GridSpec(args.n))
    for label, value in sorted(rep.per_run.items()):
        print(f"{label}: implied_c0 = {value!r}")
    print(f"c0 = {rep.c0!r}")
    return runner.EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .config import RunConfig

    try:
        if args.command == "run":
            return runner.cmd_run(RunConfig.load(args.config))
        if args.command == "sweep":
            return runner.cmd_sweep(RunConfig.load(args.config, require_sweep=True))
        if args.command == "analyze":
            return runner.cmd_analyze(args.directory, args.q_list)
        if args.command == "check":
            return _cmd_check(args)
        return _cmd_calibrate(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    except BBQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return runner.EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
