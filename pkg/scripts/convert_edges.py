"""Convert comma separated edge files (e.g. a dumped ogbl-ddi split) to TSV edge lists.

    python scripts/convert_edges.py train.csv valid.csv test.csv --out data/ddi

Each input holds one ``src,dst`` pair per line; a non-numeric first line is
treated as a header. Outputs ``<stem>.tsv`` files usable with
``mad train --dataset <train.tsv> --valid-edges <valid.tsv> --test-edges <test.tsv>``.
"""

import argparse
import csv
import gzip
from pathlib import Path


def _open(path):
    return gzip.open(path, "rt", encoding="utf-8") if str(path).endswith(".gz") else open(path, encoding="utf-8")


def convert(src: Path, dst: Path) -> int:
    count = 0
    with _open(src) as fh, open(dst, "w", encoding="utf-8") as out:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if i == 0 and not row[0].strip().lstrip("-").isdigit():
                continue
            out.write(f"{int(row[0])}\t{int(row[1])}\n")
            count += 1
    return count


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("inputs", nargs="+", type=Path)
    parser.add_argument("--out", type=Path, default=Path("."))
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for src in args.inputs:
        stem = src.name.split(".")[0]
        n = convert(src, args.out / f"{stem}.tsv")
        print(f"{src} -> {args.out / (stem + '.tsv')} ({n} edges)")


if __name__ == "__main__":
    main()
