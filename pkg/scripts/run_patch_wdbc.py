#!/usr/bin/env python3
"""Patch clustering study: WDBC with the cosine measure, full vs patches."""

import argparse

from mediatop.datasets import load_wdbc
from mediatop.harness import ExperimentConfig, cross_validate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-patches", type=int, default=5)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()

    wdbc = load_wdbc()
    common = dict(n_prototypes=40, epochs=100, seed=args.seed, folds=10,
                  repeats=args.repeats, metric="cosine", standardize=True,
                  stratified=True)
    full = cross_validate(wdbc, ExperimentConfig(
        algorithm="median-ng", implementation="ng-early-coarse", **common))
    patch = cross_validate(wdbc, ExperimentConfig(
        algorithm="patch-median-ng", implementation="naive",
        n_patches=args.n_patches, **common))
    print(f"full median NG : {full.mean_accuracy:.4f} +- {full.std_accuracy:.4f}")
    print(f"patch ({args.n_patches} parts): {patch.mean_accuracy:.4f} "
          f"+- {patch.std_accuracy:.4f}")


if __name__ == "__main__":
    main()
