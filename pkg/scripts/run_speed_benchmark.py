#!/usr/bin/env python3
"""Per-epoch timings of every median SOM / NG implementation variant.

Generates a clustered synthetic dissimilarity matrix and times identical
seeded trainings across the implementations, verifying along the way that
they produce identical prototype sequences.
"""

import argparse

from mediatop.datasets import blob_dissimilarity
from mediatop.fast_ng import NG_IMPLEMENTATIONS
from mediatop.harness import ExperimentConfig, benchmark, benchmark_rows_to_csv
from mediatop.kernels import warmup
from mediatop.median import SOM_IMPLEMENTATIONS


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4200)
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    warmup()
    D = blob_dissimilarity(args.n, dim=16, centers=22, seed=1)

    som_cfg = ExperimentConfig(algorithm="median-som", n_prototypes=args.k,
                               epochs=max(args.epochs // 2, 5), seed=args.seed,
                               lattice_shape="hexagonal")
    rows = benchmark(D, "median-som", list(SOM_IMPLEMENTATIONS), som_cfg)
    print("median SOM:")
    print(benchmark_rows_to_csv(rows))

    ng_cfg = ExperimentConfig(algorithm="median-ng", n_prototypes=args.k,
                              epochs=args.epochs, seed=args.seed)
    rows = benchmark(D, "median-ng", list(NG_IMPLEMENTATIONS), ng_cfg)
    print("median NG:")
    print(benchmark_rows_to_csv(rows))


if __name__ == "__main__":
    main()
