"""Exact accelerated median NG search via early stopping.

Median NG has no analogue of SOM block summing: the neighborhood coefficient
h(rank) depends on the prototype, so field sums cannot be shared.  What does
transfer is early stopping: grouping the points by their rank for prototype j
lets the criterion accumulate in decreasing-weight order, so a losing
candidate is abandoned long before its full sum is known.  All variants
return the same prototypes as the exhaustive scan under the lowest-index tie
policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

NG_IMPLEMENTATIONS = ("naive", "ng-early-none", "ng-early-candidate",
                      "ng-early-fine", "ng-early-coarse")


@dataclass
class RankPartition:
    """Points grouped by their rank for each prototype.

    members[j] lists all point indices ordered by (rank of prototype j,
    point index); starts[j, k] slices out the class of rank k.
    """

    members: np.ndarray  # (K, N) int64
    starts: np.ndarray   # (K, K + 1) int64

    def classes(self, j: int) -> list[np.ndarray]:
        return [self.members[j, self.starts[j, k]:self.starts[j, k + 1]]
                for k in range(self.starts.shape[1] - 1)]


def rank_partition(ranks: np.ndarray) -> RankPartition:
    """Build the per-prototype rank partition from the (N, K) rank table."""
    n, k = ranks.shape
    members = np.empty((k, n), dtype=np.int64)
    starts = np.zeros((k, k + 1), dtype=np.int64)
    for j in range(k):
        col = ranks[:, j]
        members[j] = np.argsort(col, kind="stable")
        np.cumsum(np.bincount(col, minlength=k), out=starts[j, 1:])
    return RankPartition(members=members, starts=starts)


def factorized_criterion(l: int, j: int, partition: RankPartition,
                         D: np.ndarray, hk: np.ndarray,
                         budget: float = np.inf):
    """sum_k h(k) * sum_{i in class k} d(i, l), abandoned past the budget.

    Classes are accumulated in increasing rank order (decreasing weight) and
    the partial sum is checked once per class; returns (value, stopped_early).
    The value is exact whenever stopped_early is False.
    """
    col = np.ascontiguousarray(D[:, l])
    s = 0.0
    k = hk.shape[0]
    for kc in range(k):
        cls = partition.members[j, partition.starts[j, kc]:partition.starts[j, kc + 1]]
        s += hk[kc] * float(col[cls].sum())
        if s > budget:
            return s, True
    return s, False


def order_candidates(j: int, mode: str, loc: np.ndarray, D: np.ndarray,
                     winner: np.ndarray | None = None,
                     partition: RankPartition | None = None) -> np.ndarray:
    """Candidate visit order for the prototype-j search.

    "field-distance": the current receptive field of j first, then the other
    fields by increasing prototype-to-prototype dissimilarity (ascending
    index inside each field).  "rank": all points by increasing rank for j.
    """
    n = D.shape[0]
    if mode == "rank":
        if partition is None:
            raise ValueError("rank ordering needs a rank partition")
        return partition.members[j]
    if mode != "field-distance":
        raise ValueError(f"unknown candidate ordering {mode!r}")
    if winner is None:
        raise ValueError("field-distance ordering needs current winners")
    k = loc.shape[0]
    proto_d = D[loc[j], loc]
    others = np.array([c for c in range(k) if c != j], dtype=np.int64)
    class_seq = np.concatenate([[j], others[np.argsort(proto_d[others], kind="stable")]])
    grouped = np.argsort(winner, kind="stable")
    starts = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(np.bincount(winner, minlength=k), out=starts[1:])
    return np.concatenate([grouped[starts[c]:starts[c + 1]] for c in class_seq])


def ng_prototype_search(j: int, ordering: np.ndarray, partition: RankPartition | None,
                        DT: np.ndarray, hk: np.ndarray, weights: np.ndarray,
                        grain: str = "coarse",
                        claimed: np.ndarray | None = None,
                        counters: np.ndarray | None = None,
                        hw_col: np.ndarray | None = None,
                        use_w: bool | None = None):
    """Early-stopping argmin over the candidates in `ordering`.

    grain "fine"/"coarse" use the factorized accumulation over the rank
    partition with per-element or per-class monitoring; grain "plain" sums in
    natural point order (hw_col must then carry the per-point coefficients).
    Returns (index, value) of the exact minimum under lowest-index ties.
    """
    n = DT.shape[0]
    if claimed is None:
        claimed = np.zeros(n, dtype=bool)
    if counters is None:
        counters = np.zeros(3, dtype=np.int64)
    ordering = np.ascontiguousarray(ordering, dtype=np.int64)
    if grain == "plain":
        idx, val = kernels.ng_search_plain(DT, hw_col, ordering, claimed, counters)
    elif grain in ("fine", "coarse"):
        if use_w is None:
            use_w = bool(np.any(weights != 1.0))
        idx, val = kernels.ng_search_factorized(
            DT, weights, hk,
            np.ascontiguousarray(partition.members[j]),
            np.ascontiguousarray(partition.starts[j]),
            ordering, grain == "coarse", use_w, claimed, counters)
    else:
        raise ValueError(f"unknown early-stopping grain {grain!r}")
    return int(idx), float(val)


class NgSearchState:
    """Per-epoch search context for the NG implementation variants.

    Selection walks the prototypes in index order against a growing claimed
    mask, so every prototype receives its best unclaimed candidate.  That is
    exactly the collision-prevention outcome (a prototype whose unconstrained
    argmin is taken falls through to its next-best unclaimed candidate) with
    no repeated searches.
    """

    def __init__(self, D, DT, ranks, hk, weights, winner, loc, impl):
        if impl not in NG_IMPLEMENTATIONS:
            raise ValueError(f"unknown NG implementation {impl!r}")
        self.impl = impl
        self.D = D
        self.DT = DT
        self.hk = hk
        self.weights = weights
        self.counters = np.zeros(3, dtype=np.int64)
        n, k = ranks.shape
        self.k = k
        self.partition = None
        self.hw = None
        self.orders = None
        if impl in ("naive", "ng-early-none", "ng-early-candidate"):
            self.hw = weights[:, None] * hk[ranks]
            if impl == "ng-early-candidate":
                self.orders = [order_candidates(j, "field-distance", loc, D, winner=winner)
                               for j in range(k)]
            elif impl == "ng-early-none":
                self.orders = [np.arange(n, dtype=np.int64)] * k
        else:
            self.partition = rank_partition(ranks)
            self.grain = "fine" if impl == "ng-early-fine" else "coarse"
            self.use_w = bool(np.any(weights != 1.0))

    def _search(self, j, claimed):
        if self.impl == "naive":
            idx, _ = kernels.standard_scan(
                self.DT, np.ascontiguousarray(self.hw[:, j]), claimed,
                self.counters)
        elif self.impl in ("ng-early-none", "ng-early-candidate"):
            idx, _ = ng_prototype_search(
                j, self.orders[j], None, self.DT, self.hk, self.weights,
                grain="plain", claimed=claimed, counters=self.counters,
                hw_col=np.ascontiguousarray(self.hw[:, j]))
        else:
            idx, _ = ng_prototype_search(
                j, self.partition.members[j], self.partition, self.DT,
                self.hk, self.weights, grain=self.grain, claimed=claimed,
                counters=self.counters, use_w=self.use_w)
        return int(idx)

    def select_all(self) -> np.ndarray:
        n = self.DT.shape[0]
        claimed = np.zeros(n, dtype=bool)
        loc = np.empty(self.k, dtype=np.int64)
        for j in range(self.k):
            c = self._search(j, claimed)
            loc[j] = c
            claimed[c] = True
        return loc
