"""Search random finite spaces separating the strong-transitivity axioms.

Example: python3 scripts/mine_st.py --want ST4 --avoid ST1 --quantale lawvere<=3 --size 3
"""

import argparse
import sys

from qqm import cli


def main() -> int:
    p = argparse.ArgumentParser()
    p.add_argument("--want", default="ST4")
    p.add_argument("--avoid", default="ST1")
    p.add_argument("--quantale", default="lawvere<=3")
    p.add_argument("--size", default="3")
    p.add_argument("--trials", default="2000")
    p.add_argument("--seed", default="0")
    p.add_argument("--save")
    args = p.parse_args()
    argv = ["workbench", "--mine", f"want={args.want};avoid={args.avoid}", "--quantale", args.quantale,
            "--size", args.size, "--trials", args.trials, "--seed", args.seed]
    if args.save:
        argv += ["--save", args.save]
    return cli.main(argv)


if __name__ == "__main__":
    sys.exit(main())
