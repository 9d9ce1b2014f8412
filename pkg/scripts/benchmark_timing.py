#!/usr/bin/env python3
"""Time the streaming resume path against a full batch recomputation."""

import argparse

from streamkde.cli import main as cli


def run() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--grid", type=int, default=500)
    parser.add_argument("--repetitions", type=int, default=20)
    parser.add_argument("--missing", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="results")
    args = parser.parse_args()
    cli(["bench", "--n", str(args.n), "--grid", str(args.grid),
         "--repetitions", str(args.repetitions),
         "--missing", str(args.missing), "--seed", str(args.seed),
         "--out-dir", args.out_dir], standalone_mode=False)


if __name__ == "__main__":
    run()
