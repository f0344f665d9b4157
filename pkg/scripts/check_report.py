#!/usr/bin/env python3
"""Recompute a model's training accuracy from the assignments CSV alone.

Reads model.json (prototype classes), assignments.csv (point -> winner), and
the original labeled data file, then reports the fraction of points whose
winner's class matches their own.  Used to cross-check harness numbers with
arithmetic independent of the library internals.
"""

import argparse
import csv
import json
from pathlib import Path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", required=True)
    ap.add_argument("--assignments", required=True)
    ap.add_argument("--input", required=True, help="labeled vector CSV (label last)")
    args = ap.parse_args()

    model = json.loads(Path(args.model).read_text())
    proto_class = model["prototype_classes"]
    class_names = model.get("class_names")

    true_class = []
    for line in Path(args.input).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        true_class.append(line.replace(",", " ").split()[-1])
    name_to_idx = {c: i for i, c in enumerate(class_names)}

    hits = 0
    total = 0
    with open(args.assignments) as fh:
        for row in csv.DictReader(fh):
            i = int(row["point_index"])
            winner = int(row["winner"])
            total += 1
            if proto_class[winner] == name_to_idx[true_class[i]]:
                hits += 1
    print(f"{hits / total:.10f}")


if __name__ == "__main__":
    main()
