"""Single-pass patch median NG for dissimilarity matrices too large for RAM.

The data is cut into consecutive fixed-size patches.  Each patch is clustered
together with the previous patch's prototypes, which enter as additional
candidate points weighted by the number of original points they already
represent (their multiplicity).  Only the sub-blocks of the matrix touched by
the current patch are ever read, so the total number of matrix entries
accessed is O(N * p + N * K) instead of N^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ConfigError, DissimilaritySource, MatrixSource
from .median import (MedianModel, SupervisionConfig, TrainConfig,
                     train_median)


@dataclass(frozen=True)
class PatchPlan:
    """Disjoint index ranges covering 0..N-1 in consecutive patches.

    The base size is floor(N / n_patches); the remainder is spread one point
    each over the first patches.
    """

    n_total: int
    n_patches: int
    base_size: int
    bounds: tuple = field(default=())

    def indices(self, i: int) -> np.ndarray:
        start, stop = self.bounds[i]
        return np.arange(start, stop, dtype=np.int64)

    def size(self, i: int) -> int:
        start, stop = self.bounds[i]
        return stop - start


def plan_patches(n_total: int, n_patches: int) -> PatchPlan:
    if n_patches < 1 or n_patches > n_total:
        raise ConfigError(f"need 1 <= n_patches <= N, got {n_patches} for N={n_total}")
    base = n_total // n_patches
    extra = n_total - base * n_patches
    bounds = []
    start = 0
    for i in range(n_patches):
        size = base + (1 if i < extra else 0)
        bounds.append((start, start + size))
        start += size
    assert start == n_total
    return PatchPlan(n_total=n_total, n_patches=n_patches, base_size=base,
                     bounds=tuple(bounds))


@dataclass
class ExtendedPatch:
    """A patch block extended by the carried prototypes.

    Row/column order: first the K carried prototypes, then the patch points.
    origin maps local rows to global data indices; multiplicity counts how
    many original points each row represents (new points carry 1).
    """

    dissim: np.ndarray
    multiplicity: np.ndarray
    origin: np.ndarray

    @property
    def size(self) -> int:
        return self.origin.size


def build_extended_patch(source: DissimilaritySource, plan: PatchPlan, i: int,
                         prev_loc: np.ndarray, prev_mult: np.ndarray) -> ExtendedPatch:
    """Assemble the extended patch for step i >= 1 from sub-blocks of D."""
    if not source.symmetry_declared:
        raise ConfigError("patch clustering requires a symmetric dissimilarity source")
    if i < 1:
        raise ConfigError("patch 0 is plain; extended patches start at 1")
    prev_loc = np.asarray(prev_loc, dtype=np.int64)
    prev_mult = np.asarray(prev_mult, dtype=np.int64)
    idx = plan.indices(i)
    k = prev_loc.size
    p = idx.size
    total = k + p
    dissim = np.zeros((total, total))
    dissim[:k, :k] = source.symmetric_block(prev_loc)
    cross = source.block(prev_loc, idx)
    dissim[:k, k:] = cross
    dissim[k:, :k] = cross.T
    dissim[k:, k:] = source.symmetric_block(idx)
    origin = np.concatenate([prev_loc, idx])
    if np.unique(origin).size != origin.size:
        raise ConfigError("carried prototypes overlap the current patch")
    multiplicity = np.concatenate([prev_mult,
                                   np.ones(p, dtype=np.int64)])
    return ExtendedPatch(dissim=dissim, multiplicity=multiplicity, origin=origin)


def weighted_median_ng(dissim: np.ndarray, multiplicity: np.ndarray, k: int,
                       epochs: int, seed: int, *,
                       sigma_start: float | None = None,
                       sigma_end: float = 0.01,
                       implementation: str = "naive",
                       supervision: SupervisionConfig | None = None,
                       labels=None, label_mask=None,
                       init_loc=None):
    """Median NG where point i carries weight multiplicity[i].

    The weight multiplies every cost and update contribution of the point, so
    a point with multiplicity c behaves exactly like c stacked copies.
    Returns the train result plus the per-prototype multiplicity totals of
    the final receptive fields.
    """
    multiplicity = np.asarray(multiplicity)
    cfg = TrainConfig(n_prototypes=k, epochs=epochs, sigma_start=sigma_start,
                      sigma_end=sigma_end, seed=seed,
                      implementation=implementation, supervision=supervision)
    result = train_median(dissim, "median-ng", cfg,
                          weights=multiplicity.astype(float),
                          labels=labels, label_mask=label_mask,
                          init_loc=init_loc, symmetric=True)
    field_mult = np.zeros(k, dtype=np.int64)
    np.add.at(field_mult, result.assignment, multiplicity.astype(np.int64))
    return result, field_mult


@dataclass
class PatchResult:
    model: MedianModel
    multiplicity: np.ndarray
    patch_histories: list
    entries_read: int


def patch_median_ng(source: DissimilaritySource, k: int, n_patches: int,
                    epochs: int = 100, seed: int = 0, *,
                    sigma_start: float | None = None, sigma_end: float = 0.01,
                    implementation: str = "naive",
                    supervision: SupervisionConfig | None = None,
                    labels=None, label_mask=None) -> PatchResult:
    """Cluster a symmetric dissimilarity source in one pass over the data.

    Patch 0 is trained as plain median NG; every later patch is extended by
    the previous prototypes (weighted by their receptive-field multiplicity)
    and trained with the weighted scheme, warm-started at the carried
    prototypes.  Each patch runs its own full annealing schedule.
    """
    if isinstance(source, np.ndarray):
        source = MatrixSource(source)
    if not source.symmetry_declared:
        raise ConfigError("patch clustering requires a symmetric dissimilarity source")
    n = source.size
    plan = plan_patches(n, n_patches)
    if k > plan.base_size:
        raise ConfigError(
            f"K={k} exceeds the patch size {plan.base_size}; use fewer patches")
    labels = None if labels is None else np.asarray(labels, dtype=float)
    if labels is not None and label_mask is None:
        label_mask = np.ones(n, dtype=bool)

    entries = 0
    histories = []
    idx0 = plan.indices(0)
    entries += idx0.size * (idx0.size - 1) // 2
    dis0 = source.symmetric_block(idx0)
    cfg_labels = None if labels is None else labels[idx0]
    cfg_mask = None if labels is None else label_mask[idx0]
    result, field_mult = weighted_median_ng(
        dis0, np.ones(idx0.size, dtype=np.int64), k, epochs, seed,
        sigma_start=sigma_start, sigma_end=sigma_end,
        implementation=implementation, supervision=supervision,
        labels=cfg_labels, label_mask=cfg_mask)
    histories.append(result.history)
    loc_global = idx0[result.model.loc]
    mult = field_mult
    Y = result.model.labels

    for i in range(1, n_patches):
        ext = build_extended_patch(source, plan, i, loc_global, mult)
        kp = loc_global.size
        entries += kp * (kp - 1) // 2 + kp * plan.size(i) + plan.size(i) * (plan.size(i) - 1) // 2
        if labels is not None:
            ext_labels = np.zeros((ext.size, labels.shape[1]))
            ext_mask = np.zeros(ext.size, dtype=bool)
            if Y is not None:
                ext_labels[:kp] = Y
                ext_mask[:kp] = Y.sum(axis=1) > 0
            patch_idx = plan.indices(i)
            ext_labels[kp:] = labels[patch_idx]
            ext_mask[kp:] = label_mask[patch_idx]
        else:
            ext_labels = None
            ext_mask = None
        result, field_mult = weighted_median_ng(
            ext.dissim, ext.multiplicity, k, epochs, seed,
            sigma_start=sigma_start, sigma_end=sigma_end,
            implementation=implementation, supervision=supervision,
            labels=ext_labels, label_mask=ext_mask,
            init_loc=np.arange(k, dtype=np.int64))
        histories.append(result.history)
        loc_global = ext.origin[result.model.loc]
        mult = field_mult
        Y = result.model.labels

    model = result.model
    final = MedianModel(
        algorithm="patch-median-ng", n_prototypes=k, loc=loc_global,
        labels=Y, crisp_classes=model.crisp_classes,
        sigma_start=model.sigma_start, sigma_end=model.sigma_end,
        epochs_budget=epochs, beta=model.beta, seed=seed,
        epochs_run=sum(len(h) for h in histories),
        final_cost=model.final_cost, implementation=implementation,
        multiplicity=mult,
        metadata=dict(model.metadata, n_patches=n_patches,
                      patch_sizes=[plan.size(i) for i in range(n_patches)],
                      schedule_restarts_per_patch=True,
                      entries_read=entries))
    return PatchResult(model=final, multiplicity=mult,
                       patch_histories=histories, entries_read=entries)
