"""Run the bundled obstacle and cart-pole scenarios and write their artifacts.

    python3 scripts/reproduce_examples.py [--out out] [--no-plots]
"""
import argparse
from pathlib import Path

from pcsafety import runner
from pcsafety.config import load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out")
    ap.add_argument("--no-plots", action="store_true")
    args = ap.parse_args()

    for path in sorted(CONFIGS.glob("*.cfg")):
        config = load_config(path)
        out = Path(args.out) / config.scenario.id
        code, runs = runner.run_scenario(config, out, make_plots=not args.no_plots)
        checks = runner.scenario_checks(config, runs)
        status = "ok" if all(checks.values()) else "FAIL"
        print(f"{config.scenario.id:20s} {status:4s} exit={code} " + " ".join(f"{k}={v}" for k, v in checks.items()))


if __name__ == "__main__":
    main()
