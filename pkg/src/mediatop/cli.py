"""Command-line surface: train, evaluate, benchmark, distance, inspect.

Exit codes: 1 usage error, 2 data error, 3 configuration error, 4 internal
invariant violation.  Every run is deterministic given --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import (ConfigError, DataError, InvariantError, MatrixSource,
                   load_dissimilarity, load_sequence_file, load_vector_file,
                   materialize_dissimilarity, save_dissimilarity,
                   zscore_standardize)
from .euclid import (batch_kmeans, batch_ng, batch_som, default_schedule_ng,
                     default_schedule_som)
from .harness import (ALL_ALGORITHMS, BATCH_ALGORITHMS, ExperimentConfig,
                      benchmark, benchmark_rows_to_csv, cross_validate,
                      median_model_to_dict, model_json, square_lattice,
                      validate_config)
from .median import SupervisionConfig, TrainConfig, posterior_label, train_median
from .patch import patch_median_ng


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    p = _Parser(prog="mediatop",
                description="Prototype-based topographic clustering for vector "
                            "and dissimilarity data")
    sub = p.add_subparsers(dest="command", required=True)

    def add_data_args(sp, need_labels=False):
        sp.add_argument("--input", required=True, help="input data file")
        sp.add_argument("--input-kind", choices=["vectors", "sequences", "matrix"],
                        default="vectors")
        sp.add_argument("--labels", choices=["none", "last"],
                        default="last" if need_labels else "none",
                        help="where class labels live in a vector file")
        sp.add_argument("--labels-file", default=None,
                        help="separate class file, one label per line "
                             "(for matrix or sequence input)")
        sp.add_argument("--metric", choices=["sqeuclidean", "cosine", "edit"],
                        default="sqeuclidean")
        sp.add_argument("--indel", type=float, default=4.5,
                        help="insertion/deletion cost of the edit metric")
        sp.add_argument("--standardize", action="store_true",
                        help="z-score the vector columns first")
        sp.add_argument("--zscore-convention", choices=["population", "sample"],
                        default="population")

    def add_train_args(sp):
        sp.add_argument("--algorithm", required=True, choices=list(ALL_ALGORITHMS))
        sp.add_argument("--impl", default="naive", help="implementation variant")
        sp.add_argument("--k", type=int, required=True, help="number of prototypes")
        sp.add_argument("--epochs", type=int, default=100)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--beta", type=float, default=1.0)
        sp.add_argument("--supervised", action="store_true")
        sp.add_argument("--n-patches", type=int, default=1)
        sp.add_argument("--sigma-start", type=float, default=None)
        sp.add_argument("--sigma-end", type=float, default=0.01)
        sp.add_argument("--lattice-shape", choices=["rectangular", "hexagonal"],
                        default="rectangular")
        sp.add_argument("--tie-mode", choices=["index", "random"], default="index")

    t = sub.add_parser("train", help="fit one model and dump model/assignments")
    add_data_args(t)
    add_train_args(t)
    t.add_argument("--output-dir", default=".", help="where model.json etc. go")

    e = sub.add_parser("evaluate", help="repeated cross-validation report")
    add_data_args(e, need_labels=True)
    add_train_args(e)
    e.add_argument("--folds", type=int, default=2)
    e.add_argument("--repeats", type=int, default=1)
    e.add_argument("--stratified", action="store_true")
    e.add_argument("--beta-grid", default=None,
                   help="comma-separated betas to sweep (supervised)")
    e.add_argument("--output", default=None, help="report JSON path")

    b = sub.add_parser("benchmark", help="time implementation variants")
    add_data_args(b)
    add_train_args(b)
    b.add_argument("--impls", required=True,
                   help="comma-separated implementation ids")
    b.add_argument("--output", default=None, help="timing table CSV path")

    d = sub.add_parser("distance", help="materialize a dissimilarity matrix file")
    add_data_args(d)
    d.add_argument("--output", required=True)
    d.add_argument("--format", choices=["binary", "text"], default="binary")

    i = sub.add_parser("inspect", help="dump a model and its receptive fields")
    add_data_args(i)
    i.add_argument("--model", required=True, help="model JSON file")
    i.add_argument("--output", default=None, help="receptive-field CSV path")
    return p


def _load_labels_file(path, n):
    names = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(names) != n:
        raise DataError(f"label file holds {len(names)} labels for {n} items")
    classes = sorted(set(names))
    idx = {c: i for i, c in enumerate(classes)}
    onehot = np.zeros((len(names), len(classes)))
    for i, c in enumerate(names):
        onehot[i, idx[c]] = 1.0
    return onehot, classes


def _load_data(args):
    if args.input_kind == "vectors":
        ds = load_vector_file(args.input, labels=args.labels)
        if args.standardize:
            ds = zscore_standardize(ds, args.zscore_convention)
        return ds
    if args.input_kind == "sequences":
        ds = load_sequence_file(args.input)
        if args.labels_file:
            onehot, classes = _load_labels_file(args.labels_file, ds.n)
            ds.labels = onehot
            ds.label_mask = np.ones(ds.n, dtype=bool)
            ds.class_names = classes
        return ds
    src = load_dissimilarity(args.input)
    if args.labels_file:
        onehot, classes = _load_labels_file(args.labels_file, src.size)
        src.labels = onehot
        src.class_names = classes
    return src


def _matrix_for(args, data):
    if isinstance(data, MatrixSource):
        return data.matrix
    metric = "edit" if args.input_kind == "sequences" else args.metric
    return materialize_dissimilarity(data, metric, args.indel).matrix


def _cmd_train(args) -> int:
    data = _load_data(args)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    labels = getattr(data, "labels", None)
    mask = getattr(data, "label_mask", None)
    class_names = getattr(data, "class_names", None)
    meta = {"standardize": args.standardize,
            "zscore_convention": args.zscore_convention if args.standardize else None,
            "input_kind": args.input_kind, "metric": args.metric}

    if args.algorithm in BATCH_ALGORITHMS:
        if args.input_kind != "vectors":
            raise ConfigError("batch algorithms need vector input")
        if args.algorithm == "batch-kmeans":
            res = batch_kmeans(data, args.k, args.epochs, args.seed)
        elif args.algorithm == "batch-ng":
            sched = default_schedule_ng(args.k, args.epochs, args.sigma_end)
            res = batch_ng(data, args.k, sched, args.seed)
        else:
            lattice = square_lattice(args.k, args.lattice_shape)
            sched = default_schedule_som(lattice, args.epochs, args.sigma_end)
            res = batch_som(data, lattice, sched, args.seed)
        w = res.prototypes.w
        diff = data.points[:, None, :] - w[None, :, :]
        dists = np.einsum("nkm,nkm->nk", diff, diff)
        assignment = res.assignment.winner
        crisp = None
        if labels is not None and mask is not None and mask.any():
            crisp = posterior_label(np.arange(args.k), assignment, labels,
                                    mask, dists)
        payload = {"algorithm": args.algorithm, "K": args.k,
                   "prototype_vectors": [[float(v) for v in row] for row in w],
                   "prototype_classes": (None if crisp is None
                                         else [int(v) for v in crisp]),
                   "sigma_schedule": {"epochs": args.epochs},
                   "seed": args.seed, "epochs_run": res.epochs_run,
                   "final_cost": res.history[-1]["cost"],
                   "class_names": class_names, "metadata": meta}
        winner_distance = dists[np.arange(dists.shape[0]), assignment]
        history_rows = [{"epoch": i, **h} for i, h in enumerate(res.history)]
    else:
        matrix = _matrix_for(args, data)
        sup = SupervisionConfig(beta=args.beta) if args.supervised else None
        if args.algorithm == "patch-median-ng":
            pres = patch_median_ng(MatrixSource(matrix), args.k, args.n_patches,
                                   epochs=args.epochs, seed=args.seed,
                                   sigma_start=args.sigma_start,
                                   sigma_end=args.sigma_end,
                                   implementation=args.impl, supervision=sup,
                                   labels=labels if args.supervised else None,
                                   label_mask=mask if args.supervised else None)
            model = pres.model
            dcols = matrix[:, model.loc]
            assignment = np.argmin(dcols, axis=1)
            winner_distance = dcols[np.arange(matrix.shape[0]), assignment]
            if (model.crisp_classes is None and labels is not None
                    and mask is not None and mask.any()):
                model.crisp_classes = posterior_label(model.loc, assignment,
                                                      labels, mask, dcols)
            history_rows = [asdict(r) for h in pres.patch_histories for r in h]
        else:
            lattice = (square_lattice(args.k, args.lattice_shape)
                       if args.algorithm == "median-som" else None)
            cfg = TrainConfig(n_prototypes=args.k, epochs=args.epochs,
                              sigma_start=args.sigma_start,
                              sigma_end=args.sigma_end, seed=args.seed,
                              implementation=args.impl, lattice=lattice,
                              supervision=sup, tie_mode=args.tie_mode)
            res = train_median(matrix, args.algorithm, cfg, labels=labels,
                               label_mask=mask, metadata=meta)
            model = res.model
            assignment = res.assignment
            winner_distance = res.winner_distance
            history_rows = [asdict(r) for r in res.history]
        model.metadata.update(meta)
        payload = median_model_to_dict(model)
        payload["class_names"] = class_names

    for row in history_rows:
        row.pop("loc", None)
    (outdir / "model.json").write_text(model_json(payload))
    with (outdir / "assignments.csv").open("w") as fh:
        fh.write("point_index,winner,rank0_distance\n")
        for i, (w_i, d_i) in enumerate(zip(assignment, winner_distance)):
            fh.write(f"{i},{int(w_i)},{float(d_i)!r}\n")
    report = {"report_version": 1, "history": history_rows,
              "epochs_run": len(history_rows)}
    (outdir / "report.json").write_text(model_json(report))
    print(f"wrote {outdir / 'model.json'}")
    return 0


def _cmd_evaluate(args) -> int:
    data = _load_data(args)
    config = ExperimentConfig(
        algorithm=args.algorithm, n_prototypes=args.k,
        implementation=args.impl, epochs=args.epochs, beta=args.beta,
        supervised=args.supervised, n_patches=args.n_patches, seed=args.seed,
        folds=args.folds, repeats=args.repeats, metric=args.metric,
        indel_cost=args.indel, standardize=False,
        stratified=args.stratified, sigma_start=args.sigma_start,
        sigma_end=args.sigma_end, lattice_shape=args.lattice_shape,
        tie_mode=args.tie_mode)
    validate_config(config)
    if args.beta_grid:
        betas = [float(v) for v in args.beta_grid.split(",") if v.strip()]
        reports = {b: cross_validate(data, ExperimentConfig(
            **{**asdict(config), "beta": b, "supervised": True}))
            for b in betas}
        payload = {"report_version": 1,
                   "beta_sweep": {str(b): r.to_dict() for b, r in reports.items()}}
        for b, r in reports.items():
            print(f"beta={b}: accuracy {r.mean_accuracy:.4f} "
                  f"+- {r.std_accuracy:.4f}")
    else:
        report = cross_validate(data, config)
        payload = report.to_dict()
        print(f"accuracy {report.mean_accuracy:.4f} +- {report.std_accuracy:.4f}  "
              f"e_half {report.mean_e_half:.4f} +- {report.std_e_half:.4f}")
    if args.output:
        Path(args.output).write_text(model_json(payload))
    return 0


def _cmd_benchmark(args) -> int:
    data = _load_data(args)
    matrix = _matrix_for(args, data)
    impls = [v.strip() for v in args.impls.split(",") if v.strip()]
    config = ExperimentConfig(
        algorithm=args.algorithm, n_prototypes=args.k,
        implementation=impls[0], epochs=args.epochs, seed=args.seed,
        sigma_start=args.sigma_start, sigma_end=args.sigma_end,
        lattice_shape=args.lattice_shape, tie_mode=args.tie_mode)
    rows = benchmark(matrix, args.algorithm, impls, config)
    csv = benchmark_rows_to_csv(rows)
    if args.output:
        Path(args.output).write_text(csv)
    print(csv, end="")
    print("equality check: pass")
    return 0


def _cmd_distance(args) -> int:
    data = _load_data(args)
    if isinstance(data, MatrixSource):
        raise ConfigError("distance expects vector or sequence input")
    metric = "edit" if args.input_kind == "sequences" else args.metric
    src = materialize_dissimilarity(data, metric, args.indel)
    save_dissimilarity(args.output, src.matrix, fmt=args.format)
    print(f"wrote {args.output} (N={src.size}, format={args.format})")
    return 0


def _cmd_inspect(args) -> int:
    data = _load_data(args)
    model = json.loads(Path(args.model).read_text())
    if "prototype_indices" in model and model.get("prototype_indices") is not None:
        loc = np.asarray(model["prototype_indices"], dtype=np.int64)
        matrix = _matrix_for(args, data)
        dcols = matrix[:, loc]
    elif "prototype_vectors" in model:
        w = np.asarray(model["prototype_vectors"], dtype=float)
        pts = data.points
        diff = pts[:, None, :] - w[None, :, :]
        dcols = np.einsum("nkm,nkm->nk", diff, diff)
    else:
        raise DataError("model file carries no prototypes")
    assignment = np.argmin(dcols, axis=1)
    lines = ["prototype_index,point_index,distance"]
    for j in range(dcols.shape[1]):
        for i in np.flatnonzero(assignment == j):
            lines.append(f"{j},{i},{float(dcols[i, j])!r}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    k = dcols.shape[1]
    sizes = np.bincount(assignment, minlength=k)
    print(f"model {model['algorithm']}: K={k}, field sizes "
          f"{sizes.tolist()}", file=sys.stderr)
    return 0


_COMMANDS = {"train": _cmd_train, "evaluate": _cmd_evaluate,
             "benchmark": _cmd_benchmark, "distance": _cmd_distance,
             "inspect": _cmd_inspect}


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 4


def main() -> None:
    raise SystemExit(run_cli())


if __name__ == "__main__":
    main()
