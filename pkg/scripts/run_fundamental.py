"""Sample the fundamental inequality over the ground corpus and print the JSON report.

Usage: python3 scripts/run_fundamental.py [--samples N] [--seed S] [--workers W]
"""

import argparse
import sys

from qqm import harness as H


def main() -> int:
    p = argparse.ArgumentParser()
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    args = p.parse_args()
    cfg = H.config_from_env(H.RunConfig(samples=args.samples, seed=args.seed, workers=args.workers, out=args.out))
    report = H.fundamental_suite(cfg)
    sys.stdout.write(H.write_report(report, cfg.out))
    return 1 if report["verdict"]["status"] == "refuted" else 0


if __name__ == "__main__":
    sys.exit(main())
