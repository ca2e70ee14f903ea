"""Per-step wall time of both PC laws against the exact QP solve.

Absolute numbers depend on the machine; only the ratio is meaningful.

    python3 scripts/timing_comparison.py [config ...]
"""
import argparse
import tempfile
from pathlib import Path

from pcsafety import runner
from pcsafety.config import load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", default=[str(CONFIGS / "example2_cartpole.cfg")])
    args = ap.parse_args()

    for path in args.configs:
        config = load_config(path)
        with tempfile.TemporaryDirectory() as tmp:
            summary, errors, _, _ = runner.compare_controllers(config, tmp)
        print(config.scenario.id)
        for kind, rep in summary["controllers"].items():
            print(f"  {kind:12s} mean {rep['mean_ms']:.4f} ms  max {rep['max_ms']:.3f} ms  p99 {rep['p99_ms']:.4f} ms")
        print(f"  speedup oracle/gradient {summary['speedup_oracle_over_pc_gradient']:.2f}"
              f"  oracle/newton {summary['speedup_oracle_over_pc_newton']:.2f}")


if __name__ == "__main__":
    main()
