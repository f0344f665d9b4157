#!/usr/bin/env python3
"""WDBC supervision study: repeated half-splits, supervised vs unsupervised.

Mirrors the acceptance protocol: K=40, 200 epochs, median NG, label blending
at beta. Reports paired accuracies.
"""

import argparse

import numpy as np

from mediatop.datasets import load_wdbc
from mediatop.harness import ExperimentConfig, cross_validate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=50,
                    help="repeats of a 2-fold split (2 runs each)")
    ap.add_argument("--beta", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--sigma-start", type=float, default=3.0)
    args = ap.parse_args()

    wdbc = load_wdbc()
    common = dict(algorithm="median-ng", n_prototypes=40,
                  implementation="ng-early-coarse", epochs=200, seed=args.seed,
                  folds=2, repeats=args.repeats, standardize=True,
                  sigma_start=args.sigma_start)
    sup = cross_validate(wdbc, ExperimentConfig(beta=args.beta, supervised=True,
                                                **common))
    uns = cross_validate(wdbc, ExperimentConfig(beta=1.0, supervised=False,
                                                **common))
    a = np.array([r.accuracy for r in sup.runs])
    b = np.array([r.accuracy for r in uns.runs])
    print(f"supervised (beta={args.beta}): {a.mean():.4f} +- {a.std():.4f}")
    print(f"unsupervised:                 {b.mean():.4f} +- {b.std():.4f}")
    print(f"supervised >= unsupervised in {(a >= b).sum()}/{len(a)} paired runs")


if __name__ == "__main__":
    main()
