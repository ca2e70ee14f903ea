"""Command line: ``pcsafety run|compare|suite``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import runner
from .config import load_config
from .errors import ConfigurationError, PcSafetyError

log = logging.getLogger("pcsafety")


def _load(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, scenario=dataclasses.replace(config.scenario, seed=args.seed))
    return config


def cmd_run(args):
    config = _load(args)
    out = Path(args.out or config.output.dir)
    code, runs = runner.run_scenario(config, out, make_plots=False if args.no_plots else None, timing=not args.no_timing)
    checks = runner.scenario_checks(config, runs)
    for name, ok in checks.items():
        print(f"{name:16s} {'pass' if ok else 'FAIL'}")
    print(f"artifacts written to {out}")
    return code


def cmd_compare(args):
    config = _load(args)
    out = Path(args.out or config.output.dir)
    summary, _, _, _ = runner.compare_controllers(config, out, frozen=args.frozen)
    for kind, rep in summary["controllers"].items():
        print(f"{kind:12s} mean {rep['mean_ms']:.4f} ms  max {rep['max_ms']:.4f} ms  p99 {rep['p99_ms']:.4f} ms")
    print(f"oracle/pc_gradient speedup {summary['speedup_oracle_over_pc_gradient']:.2f}")
    print(f"oracle/pc_newton speedup   {summary['speedup_oracle_over_pc_newton']:.2f}")
    for kind, fit in summary.get("decay", {}).items():
        rates = " ".join(f"{r:.2f}" for r in fit["fitted_rate"])
        print(f"{kind:12s} fitted decay rate {rates}  (gamma_hat {fit['gamma_hat']:.2f})")
    return runner.EXIT_OK


def cmd_suite(args):
    directory = Path(args.dir)
    paths = sorted(directory.glob("*.cfg"))
    if not paths:
        print(f"no *.cfg files in {directory}", file=sys.stderr)
        return runner.EXIT_CONFIG
    all_ok = True
    for path in paths:
        config = load_config(path)
        out = Path(args.out) / config.scenario.id if args.out else None
        _, runs = runner.run_scenario(config, out, make_plots=False if args.no_plots else None, timing=not args.no_timing)
        checks = runner.scenario_checks(config, runs)
        ok = all(checks.values())
        all_ok &= ok
        detail = " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items())
        print(f"{'PASS' if ok else 'FAIL'}  {config.scenario.id:24s} {detail}")
    return runner.EXIT_OK if all_ok else runner.EXIT_STEP_FAILED


def build_parser():
    parser = argparse.ArgumentParser(prog="pcsafety", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--no-plots", action="store_true")
        p.add_argument("--no-timing", action="store_true", help="write 0 in the step_time_ms column")

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="PC laws against the exact QP")
    p.add_argument("config")
    p.add_argument("--frozen", action="store_true", help="hold the plant state fixed")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("suite", help="run every *.cfg in a directory")
    p.add_argument("dir")
    common(p)
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    except PcSafetyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return runner.EXIT_STEP_FAILED


if __name__ == "__main__":
    sys.exit(main())
