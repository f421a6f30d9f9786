"""Print the difference-quotient bound table as eps shrinks with a = eps**2."""

import argparse
import sys

from qqm import harness as H


def main() -> int:
    p = argparse.ArgumentParser()
    p.add_argument("--eps", default="0.1,0.01,0.001,0.0001")
    args = p.parse_args()
    out = H.bound_sweep([float(e) for e in args.eps.split(",")])
    print(f"{'eps':>10} {'a':>12} {'bound':>14} {'actual':>14}")
    for r in out["rows"]:
        print(f"{r['eps']:>10g} {r['a']:>12g} {r['bound']:>14.6g} {r['actual']:>14.6g}")
    print("sound" if out["sound"] else "UNSOUND", "decreasing" if out["decreasing"] else "not decreasing")
    return 0 if out["sound"] and out["decreasing"] else 1


if __name__ == "__main__":
    sys.exit(main())
