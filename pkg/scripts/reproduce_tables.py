#!/usr/bin/env python3
"""Reproduce all five benchmark tables.

Full paper-scale defaults take a while; pass --replications to shrink
the Monte Carlo size for a quick look, e.g.:

    python scripts/reproduce_tables.py --replications 50 --threads 4
"""

import argparse

from streamkde.cli import main as cli


def run() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--replications", type=int, default=None)
    parser.add_argument("--threads", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--tables", type=int, nargs="+",
                        default=[1, 2, 3, 4, 5])
    args = parser.parse_args()
    for table in args.tables:
        argv = ["reproduce-table", "--table", str(table),
                "--threads", str(args.threads), "--seed", str(args.seed),
                "--out-dir", args.out_dir]
        if args.replications is not None:
            argv += ["--replications", str(args.replications)]
        print(f"== table {table} ==")
        cli(argv, standalone_mode=False)


if __name__ == "__main__":
    run()
