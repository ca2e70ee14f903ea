"""Hold the plant state fixed and fit the decay rate of the tracking error.

The error to the barrier minimizer should fall at the effective rate
(q_c gamma for the gradient law, gamma for Newton); the error to the exact
QP optimum levels off at the barrier suboptimality gap.

    python3 scripts/frozen_decay.py [--horizon 0.5]
"""
import argparse
import dataclasses
import tempfile
from pathlib import Path

import numpy as np

from pcsafety import runner
from pcsafety.config import load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(CONFIGS / "example1_single.cfg"))
    ap.add_argument("--horizon", type=float, default=0.5)
    args = ap.parse_args()

    config = load_config(args.config)
    config = dataclasses.replace(config, scenario=dataclasses.replace(config.scenario, horizon=args.horizon))
    with tempfile.TemporaryDirectory() as tmp:
        summary, errors, barrier_errors, _ = runner.compare_controllers(config, tmp, frozen=True)
    for kind, fit in summary["decay"].items():
        rate = fit["fitted_rate"][0]
        plateau = np.nanmin(errors[kind][0])
        print(f"{kind:12s} fitted {rate:7.2f}  expected {fit['gamma_hat']:7.2f}  "
              f"ratio {rate / fit['gamma_hat']:.3f}  floor of |y - y*| {plateau:.2e}")


if __name__ == "__main__":
    main()
