#!/usr/bin/env python3
"""Iris comparison: batch NG vs median NG, quantization error and accuracy.

Trains both algorithms with K=6 on z-scored iris over 10 seeds, reports the
best run by quantization error plus the posterior-labeling accuracy.
"""

import argparse

import numpy as np

from mediatop.data import materialize_dissimilarity, zscore_standardize
from mediatop.datasets import load_iris
from mediatop.euclid import batch_ng, default_schedule_ng
from mediatop.median import TrainConfig, posterior_label, train_median


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=6)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--restarts", type=int, default=10)
    args = ap.parse_args()

    iris = zscore_standardize(load_iris())
    true = np.argmax(iris.labels, axis=1)

    best = None
    for seed in range(args.restarts):
        res = batch_ng(iris, args.k, default_schedule_ng(args.k, args.epochs), seed)
        eh = res.history[-1]["e_half"]
        if best is None or eh < best[0]:
            best = (eh, seed, res)
    eh, seed, res = best
    w = res.prototypes.w
    diff = iris.points[:, None, :] - w[None, :, :]
    dists = np.einsum("nkm,nkm->nk", diff, diff)
    winner = dists.argmin(axis=1)
    crisp = posterior_label(np.arange(args.k), winner, iris.labels,
                            iris.label_mask, dists)
    acc = float((crisp[winner] == true).mean())
    print(f"batch NG : e_half={eh:.4f}  accuracy={acc:.4f}  (seed {seed})")

    D = materialize_dissimilarity(iris, "sqeuclidean").matrix
    best = None
    for seed in range(args.restarts):
        cfg = TrainConfig(n_prototypes=args.k, epochs=args.epochs, seed=seed,
                          implementation="ng-early-coarse")
        r = train_median(D, "median-ng", cfg, labels=iris.labels,
                         label_mask=iris.label_mask, symmetric=True)
        if best is None or r.final_e_half < best[0]:
            best = (r.final_e_half, seed, r)
    eh, seed, r = best
    acc = float((r.model.crisp_classes[r.assignment] == true).mean())
    print(f"median NG: e_half={eh:.4f}  accuracy={acc:.4f}  (seed {seed})")


if __name__ == "__main__":
    main()
