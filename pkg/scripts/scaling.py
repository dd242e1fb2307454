"""Run-time scaling with link count, obstacle count and tolerance.

Three CSV blocks, one per axis, each produced by the bench command:

    python scripts/scaling.py --repeat 10000 > scaling.csv
"""
import argparse
import sys

from riskcert.cli import main as cli


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=10_000)
    p.add_argument("--method", default="two-shot")
    args = p.parse_args()
    common = ["--repeat", str(args.repeat), "--method", args.method, "--csv"]
    for axis in (["--links", "1,2,4,8,16"],
                 ["--links", "4", "--obstacles", "1,2,4,8,16"],
                 ["--links", "4", "--tol", "1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8"]):
        code = cli(["bench", *axis, *common])
        if code:
            sys.exit(code)


if __name__ == "__main__":
    main()
