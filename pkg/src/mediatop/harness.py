"""Evaluation harness: cross-validation, classification, benchmarking, serde.

All randomness (initializations, splits) flows from one experiment seed
through named PCG64 generators, so identical configs reproduce identical
reports byte for byte.  Independent cross-validation runs may execute on a
thread pool capped by the MEDIATOP_THREADS environment variable; the compiled
kernels release the GIL, and results are merged in run order, so the worker
count never changes any number.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .data import (ConfigError, DataError, InvariantError, Lattice,
                   MatrixSource, SequenceDataset, VectorDataset,
                   materialize_dissimilarity, zscore_standardize)
from .euclid import (batch_kmeans, batch_ng, batch_som,
                     default_schedule_ng, default_schedule_som)
from .fast_ng import NG_IMPLEMENTATIONS
from .median import (SOM_IMPLEMENTATIONS, MedianModel, SupervisionConfig,
                     TrainConfig, posterior_label, train_median)
from .patch import patch_median_ng

REPORT_VERSION = 1
BATCH_ALGORITHMS = ("batch-kmeans", "batch-ng", "batch-som")
MEDIAN_ALGORITHMS = ("median-ng", "median-som", "kmedoids")
ALL_ALGORITHMS = BATCH_ALGORITHMS + MEDIAN_ALGORITHMS + ("patch-median-ng",)


@dataclass
class ExperimentConfig:
    algorithm: str
    n_prototypes: int
    implementation: str = "naive"
    epochs: int = 100
    beta: float = 1.0
    supervised: bool = False
    n_patches: int = 1
    seed: int = 0
    folds: int = 2
    repeats: int = 1
    metric: str = "sqeuclidean"
    indel_cost: float = 4.5
    standardize: bool = False
    zscore_convention: str = "population"
    stratified: bool = False
    sigma_start: float | None = None
    sigma_end: float = 0.01
    anneal_epochs: int | None = None
    lattice_shape: str = "rectangular"
    tie_mode: str = "index"


def validate_config(config: ExperimentConfig) -> None:
    if config.algorithm not in ALL_ALGORITHMS:
        raise ConfigError(f"unknown algorithm {config.algorithm!r}")
    if config.algorithm == "median-ng" and config.implementation not in NG_IMPLEMENTATIONS:
        raise ConfigError(
            f"implementation {config.implementation!r} not valid for median-ng")
    if config.algorithm == "median-som" and config.implementation not in SOM_IMPLEMENTATIONS:
        raise ConfigError(
            f"implementation {config.implementation!r} not valid for median-som")
    if config.folds < 2:
        raise ConfigError("cross-validation needs folds >= 2")
    if not (0 < config.beta <= 1):
        raise ConfigError(f"beta must lie in (0, 1], got {config.beta}")
    if config.n_patches < 1:
        raise ConfigError("n_patches must be at least 1")


def square_lattice(k: int, shape: str = "rectangular") -> Lattice:
    """Near-square rows x cols grid with rows * cols = K."""
    rows = int(np.sqrt(k))
    while rows > 1 and k % rows != 0:
        rows -= 1
    cols = k // rows
    if shape == "hexagonal":
        return Lattice.hexagonal(rows, cols)
    return Lattice.rectangular(rows, cols)


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("MEDIATOP_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Classification


def classify_by_prototypes(crisp_classes: np.ndarray, dist_rows: np.ndarray) -> np.ndarray:
    """Nearest-prototype classification from input-space distance rows.

    dist_rows[t, j] is the distance of test item t to prototype j; ties go to
    the lower prototype index.  Missing distances (NaN/inf everywhere) are an
    input error.
    """
    dist_rows = np.atleast_2d(np.asarray(dist_rows, dtype=float))
    if not np.all(np.isfinite(dist_rows).any(axis=1)):
        raise DataError("a test item has no finite distance to any prototype")
    winner = np.argmin(dist_rows, axis=1)
    return np.asarray(crisp_classes, dtype=np.int64)[winner]


def accuracy_score(true_classes, predicted) -> float:
    true_classes = np.asarray(true_classes)
    predicted = np.asarray(predicted)
    return float(np.mean(true_classes == predicted))


# ---------------------------------------------------------------------------
# Cross-validation


@dataclass
class RunResult:
    repeat: int
    fold: int
    seed: int
    accuracy: float
    e_half: float
    e_norm: float
    epochs_run: int
    wall_time_per_epoch: float
    candidates_evaluated: int
    classes_pruned: int
    partial_abandons: int


@dataclass
class EvaluationReport:
    report_version: int
    config: dict
    runs: list[RunResult]
    mean_accuracy: float
    std_accuracy: float
    mean_e_half: float
    std_e_half: float

    def to_dict(self) -> dict:
        return {"report_version": self.report_version, "config": self.config,
                "runs": [asdict(r) for r in self.runs],
                "mean_accuracy": self.mean_accuracy,
                "std_accuracy": self.std_accuracy,
                "mean_e_half": self.mean_e_half,
                "std_e_half": self.std_e_half}


def fold_assignments(classes: np.ndarray, folds: int, rng,
                     stratified: bool) -> np.ndarray:
    """Fold id per point; stratified mode balances classes across folds."""
    n = classes.shape[0]
    out = np.empty(n, dtype=np.int64)
    if stratified:
        for c in np.unique(classes):
            members = np.flatnonzero(classes == c)
            members = members[rng.permutation(members.size)]
            out[members] = np.arange(members.size) % folds
    else:
        perm = rng.permutation(n)
        out[perm] = np.arange(n) % folds
    return out


def _prepare_features(data, config):
    """Returns (vectors, full_matrix, labels, mask, classes)."""
    if isinstance(data, VectorDataset):
        if config.standardize:
            data = zscore_standardize(data, config.zscore_convention)
        vectors = data
        matrix = None
        if config.algorithm not in BATCH_ALGORITHMS:
            matrix = materialize_dissimilarity(data, config.metric,
                                               config.indel_cost).matrix
        labels, mask = data.labels, data.label_mask
    elif isinstance(data, SequenceDataset):
        if config.algorithm in BATCH_ALGORITHMS:
            raise ConfigError("batch algorithms need vector data")
        vectors = None
        matrix = materialize_dissimilarity(data, "edit", config.indel_cost).matrix
        labels, mask = data.labels, data.label_mask
    elif isinstance(data, MatrixSource):
        if config.algorithm in BATCH_ALGORITHMS:
            raise ConfigError("batch algorithms need vector data")
        vectors = None
        matrix = data.matrix
        labels = getattr(data, "labels", None)
        mask = (np.ones(data.size, dtype=bool) if labels is not None else None)
    else:
        raise ConfigError(f"unsupported dataset type {type(data).__name__}")
    return vectors, matrix, labels, mask


def _train_fold(config: ExperimentConfig, run_seed: int, vectors, matrix,
                labels, mask, train_idx, test_idx):
    """Train on one fold and classify the held-out points.

    Returns (predictions, e_half, e_norm, epochs_run, counters, epoch_time).
    """
    alg = config.algorithm
    tr_labels = labels[train_idx]
    tr_mask = mask[train_idx]
    true_test = np.argmax(labels[test_idx], axis=1)

    if alg in BATCH_ALGORITHMS:
        pts = vectors.points[train_idx]
        train_ds = VectorDataset(pts)
        if alg == "batch-kmeans":
            res = batch_kmeans(train_ds, config.n_prototypes, config.epochs, run_seed)
        elif alg == "batch-ng":
            sched = (default_schedule_ng(config.n_prototypes, config.epochs, config.sigma_end)
                     if config.sigma_start is None else
                     _schedule(config.sigma_start, config.sigma_end, config.epochs))
            res = batch_ng(train_ds, config.n_prototypes, sched, run_seed)
        else:
            lattice = square_lattice(config.n_prototypes, config.lattice_shape)
            sched = (default_schedule_som(lattice, config.epochs, config.sigma_end)
                     if config.sigma_start is None else
                     _schedule(config.sigma_start, config.sigma_end, config.epochs))
            res = batch_som(train_ds, lattice, sched, run_seed)
        w = res.prototypes.w
        assign = res.assignment.winner
        dcols = _vector_dist_rows(pts, w)
        crisp = posterior_label(np.arange(w.shape[0]), assign, tr_labels,
                                tr_mask, dcols)
        test_rows = _vector_dist_rows(vectors.points[test_idx], w)
        pred = classify_by_prototypes(crisp, test_rows)
        hist = res.history
        e_half = hist[-1]["e_half"]
        return (pred, true_test, e_half, e_half / train_idx.size,
                len(hist), np.zeros(3, dtype=np.int64), 0.0)

    Dtr = matrix[np.ix_(train_idx, train_idx)]
    sup = SupervisionConfig(beta=config.beta, enabled=config.supervised)
    if alg == "patch-median-ng":
        pres = patch_median_ng(MatrixSource(Dtr), config.n_prototypes,
                               config.n_patches, epochs=config.epochs,
                               seed=run_seed, sigma_start=config.sigma_start,
                               sigma_end=config.sigma_end,
                               implementation=config.implementation,
                               supervision=sup if config.supervised else None,
                               labels=tr_labels if config.supervised else None,
                               label_mask=tr_mask if config.supervised else None)
        loc = pres.model.loc
        dcols = Dtr[:, loc]
        assign = np.argmin(dcols, axis=1)
        if config.supervised and pres.model.labels is not None:
            crisp = np.argmax(pres.model.labels, axis=1)
        else:
            crisp = posterior_label(loc, assign, tr_labels, tr_mask, dcols)
        e_half = 0.5 * float(dcols[np.arange(Dtr.shape[0]), assign].sum())
        history = [r for h in pres.patch_histories for r in h]
        counters = _sum_counters(history)
        epoch_time = float(np.mean([r.wall_time for r in history]))
        pred = classify_by_prototypes(crisp, matrix[np.ix_(test_idx, train_idx[loc])])
        return (pred, true_test, e_half, e_half / train_idx.size,
                len(history), counters, epoch_time)

    lattice = (square_lattice(config.n_prototypes, config.lattice_shape)
               if alg == "median-som" else None)
    cfg = TrainConfig(n_prototypes=config.n_prototypes, epochs=config.epochs,
                      sigma_start=config.sigma_start, sigma_end=config.sigma_end,
                      anneal_epochs=config.anneal_epochs, seed=run_seed,
                      implementation=config.implementation, lattice=lattice,
                      supervision=sup if config.supervised else None,
                      tie_mode=config.tie_mode)
    res = train_median(Dtr, alg, cfg, labels=tr_labels, label_mask=tr_mask,
                       symmetric=True)
    crisp = res.model.crisp_classes
    glob = train_idx[res.model.loc]
    pred = classify_by_prototypes(crisp, matrix[np.ix_(test_idx, glob)])
    counters = _sum_counters(res.history)
    epoch_time = float(np.mean([r.wall_time for r in res.history]))
    return (pred, true_test, res.final_e_half, res.final_e_norm,
            res.model.epochs_run, counters, epoch_time)


def _schedule(start, end, epochs):
    from .data import AnnealingSchedule
    return AnnealingSchedule(max(start, end), end, epochs)


def _vector_dist_rows(points, w):
    diff = points[:, None, :] - w[None, :, :]
    return np.einsum("nkm,nkm->nk", diff, diff)


def _sum_counters(history):
    out = np.zeros(3, dtype=np.int64)
    for r in history:
        out += (r.candidates_evaluated, r.classes_pruned, r.partial_abandons)
    return out


def cross_validate(data, config: ExperimentConfig) -> EvaluationReport:
    """Repeated k-fold evaluation with nearest-prototype classification.

    Labels are required; the blended training distance never leaks into test
    classification, which uses input-space distances only.
    """
    validate_config(config)
    vectors, matrix, labels, mask = _prepare_features(data, config)
    if labels is None or mask is None or not mask.any():
        raise ConfigError("cross-validation needs labeled data")
    classes = np.argmax(labels, axis=1)
    n = labels.shape[0]

    tasks = []
    for rep in range(config.repeats):
        rng = np.random.default_rng([config.seed, rep])
        fold_id = fold_assignments(classes, config.folds, rng, config.stratified)
        for f in range(config.folds):
            test_idx = np.flatnonzero(fold_id == f)
            train_idx = np.flatnonzero(fold_id != f)
            if config.n_prototypes > train_idx.size:
                raise ConfigError("training fold smaller than prototype count")
            run_seed = int(np.random.default_rng([config.seed, rep, f]).integers(2 ** 31))
            tasks.append((rep, f, run_seed, train_idx, test_idx))

    def run(task):
        rep, f, run_seed, train_idx, test_idx = task
        t0 = time.perf_counter()
        (pred, true_test, e_half, e_norm, epochs_run, counters,
         epoch_time) = _train_fold(config, run_seed, vectors, matrix, labels,
                                   mask, train_idx, test_idx)
        if epoch_time == 0.0:
            epoch_time = (time.perf_counter() - t0) / max(epochs_run, 1)
        return RunResult(repeat=rep, fold=f, seed=run_seed,
                         accuracy=accuracy_score(true_test, pred),
                         e_half=float(e_half), e_norm=float(e_norm),
                         epochs_run=epochs_run,
                         wall_time_per_epoch=epoch_time,
                         candidates_evaluated=int(counters[0]),
                         classes_pruned=int(counters[1]),
                         partial_abandons=int(counters[2]))

    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(run, tasks))
    else:
        runs = [run(t) for t in tasks]

    acc = np.array([r.accuracy for r in runs])
    eh = np.array([r.e_half for r in runs])
    return EvaluationReport(report_version=REPORT_VERSION,
                            config=asdict(config), runs=runs,
                            mean_accuracy=float(acc.mean()),
                            std_accuracy=float(acc.std()),
                            mean_e_half=float(eh.mean()),
                            std_e_half=float(eh.std()))


def beta_sweep(data, config: ExperimentConfig, betas) -> dict:
    """Cross-validate a grid of label-blending weights (supervised runs)."""
    out = {}
    for beta in betas:
        cfg = ExperimentConfig(**{**asdict(config), "beta": float(beta),
                                  "supervised": True})
        out[float(beta)] = cross_validate(data, cfg)
    return out


# ---------------------------------------------------------------------------
# Benchmarking


def benchmark(D, algorithm: str, implementations, config: ExperimentConfig):
    """Time identical seeded trainings across implementation variants.

    Exact variants must produce identical per-epoch prototype sequences; a
    mismatch raises InvariantError because it would invalidate every speed
    claim.  Returns one row per implementation with per-epoch timing stats
    and search counters.
    """
    if algorithm not in ("median-ng", "median-som", "kmedoids"):
        raise ConfigError(f"benchmark supports median algorithms, got {algorithm!r}")
    D = D.full() if hasattr(D, "full") else np.ascontiguousarray(D, dtype=float)
    lattice = (square_lattice(config.n_prototypes, config.lattice_shape)
               if algorithm == "median-som" else None)
    rows = []
    sequences = {}
    for impl in implementations:
        cfg = TrainConfig(n_prototypes=config.n_prototypes, epochs=config.epochs,
                          sigma_start=config.sigma_start,
                          sigma_end=config.sigma_end,
                          anneal_epochs=config.anneal_epochs, seed=config.seed,
                          implementation=impl, lattice=lattice,
                          tie_mode=config.tie_mode)
        res = train_median(D, algorithm, cfg, symmetric=True)
        times = np.array([r.wall_time for r in res.history])
        counters = _sum_counters(res.history)
        sequences[impl] = [tuple(r.loc) for r in res.history]
        rows.append({"implementation": impl,
                     "epochs": len(res.history),
                     "mean_epoch_time": float(times.mean()),
                     "std_epoch_time": float(times.std()),
                     "total_time": float(times.sum()),
                     "candidates_evaluated": int(counters[0]),
                     "classes_pruned": int(counters[1]),
                     "partial_abandons": int(counters[2]),
                     "final_loc": [int(v) for v in res.model.loc]})
    impls = list(sequences)
    for other in impls[1:]:
        if sequences[other] != sequences[impls[0]]:
            raise InvariantError(
                f"implementations {impls[0]!r} and {other!r} diverged on "
                "identical seeded input")
    return rows


def benchmark_rows_to_csv(rows) -> str:
    cols = ["implementation", "epochs", "mean_epoch_time", "std_epoch_time",
            "total_time", "candidates_evaluated", "classes_pruned",
            "partial_abandons"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(str(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Model serialization


def median_model_to_dict(model: MedianModel) -> dict:
    return {
        "algorithm": model.algorithm,
        "K": model.n_prototypes,
        "prototype_indices": [int(v) for v in model.loc],
        "prototype_labels": (None if model.labels is None
                             else [[float(x) for x in row] for row in model.labels]),
        "prototype_classes": (None if model.crisp_classes is None
                              else [int(v) for v in model.crisp_classes]),
        "sigma_schedule": {"sigma_start": model.sigma_start,
                           "sigma_end": model.sigma_end,
                           "epochs": model.epochs_budget},
        "beta": model.beta,
        "seed": model.seed,
        "epochs_run": model.epochs_run,
        "final_cost": model.final_cost,
        "implementation": model.implementation,
        "multiplicity": (None if model.multiplicity is None
                         else [int(v) for v in model.multiplicity]),
        "metadata": model.metadata,
    }


def median_model_from_dict(d: dict) -> MedianModel:
    return MedianModel(
        algorithm=d["algorithm"], n_prototypes=d["K"],
        loc=np.asarray(d["prototype_indices"], dtype=np.int64),
        labels=(None if d.get("prototype_labels") is None
                else np.asarray(d["prototype_labels"], dtype=float)),
        crisp_classes=(None if d.get("prototype_classes") is None
                       else np.asarray(d["prototype_classes"], dtype=np.int64)),
        sigma_start=d["sigma_schedule"]["sigma_start"],
        sigma_end=d["sigma_schedule"]["sigma_end"],
        epochs_budget=d["sigma_schedule"]["epochs"],
        beta=d["beta"], seed=d["seed"], epochs_run=d["epochs_run"],
        final_cost=d["final_cost"], implementation=d["implementation"],
        multiplicity=(None if d.get("multiplicity") is None
                      else np.asarray(d["multiplicity"], dtype=np.int64)),
        metadata=d.get("metadata", {}))


def model_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
