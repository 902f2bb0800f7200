"""Run every bundled scenario and print one status line each."""
import argparse
import sys
from pathlib import Path

from quasilab import cli
from quasilab.scenario import bundled_scenarios


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--seed", type=int)
    args = parser.parse_args(argv)
    cmd = ["batch", *[str(p) for p in bundled_scenarios()], "--out", str(Path(args.out)), "--jobs", str(args.jobs)]
    if args.seed is not None:
        cmd += ["--seed", str(args.seed)]
    return cli.main(cmd)


if __name__ == "__main__":
    sys.exit(main())
