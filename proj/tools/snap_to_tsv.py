#!/usr/bin/env python3
"""Convert a SNAP trust-network CSV (source,target,rating,time) to a signed edge list.

Ratings above zero become +1, the rest -1. Usage:

    python3 tools/snap_to_tsv.py soc-sign-bitcoinalpha.csv data/bitcoin_alpha.tsv
"""

import argparse
import csv
import gzip
import sys


def open_text(path):
    if path == "-":
        return sys.stdin
    if path.endswith(".gz"):
        return gzip.open(path, "rt", newline="")
    return open(path, newline="")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("input", help="SNAP csv file (optionally .gz), or - for stdin")
    parser.add_argument("output", help="tab-separated 'src dst sign' file")
    args = parser.parse_args()

    count = 0
    with open_text(args.input) as src, open(args.output, "w") as dst:
        dst.write("# src\tdst\tsign\n")
        for row in csv.reader(src):
            if not row or row[0].startswith("#"):
                continue
            source, target, rating = int(row[0]), int(row[1]), float(row[2])
            dst.write(f"{source}\t{target}\t{1 if rating > 0 else -1}\n")
            count += 1
    print(f"wrote {count} edges to {args.output}", file=sys.stderr)


if __name__ == "__main__":
    main()
