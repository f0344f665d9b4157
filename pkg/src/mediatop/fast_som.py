"""Exact accelerated median SOM search: block summing and branch-and-bound.

The prototype update of median SOM minimizes, for each unit j,
sum_k h(nd(k, j)) * S(k, l) over candidates l, where S(k, l) sums the
dissimilarities from receptive field k to candidate l.  Computing S once per
epoch costs O(N^2) and drops the update from O(N^2 K) to O(N^2 + N K^2);
branch-and-bound with per-field lower bounds then prunes most candidate
fields outright.  Every variant returns exactly the indices the exhaustive
scan would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import Lattice

EPS_TIE = kernels.EPS_TIE


def margin_argmin(row):
    """Lowest index whose value ties the row minimum within the margin."""
    m = row.min()
    return int(np.argmax(row <= m * (1.0 + EPS_TIE)))


@dataclass
class BlockSums:
    """Field-to-candidate sums S and the field sizes behind them."""

    S: np.ndarray
    field_sizes: np.ndarray
    min_per_field: np.ndarray  # minS[k, m] = min over candidates in field m of S[k, .]


@dataclass
class BoundTable:
    """Lower bounds eta[m, j] for the unit-j criterion over field m."""

    minS: np.ndarray
    theta_mode: str
    eta: np.ndarray


def receptive_fields(dist_to_protos: np.ndarray, lattice: Lattice, sigma: float):
    """Averaged-winner assignment and the resulting partition.

    dist_to_protos is the (N, K) table of (blended) dissimilarities from each
    point to the current prototypes.  Returns (istar, fields) where fields[j]
    lists the member indices of unit j in ascending order; empty fields are
    allowed.
    """
    H = np.exp(-lattice.nd_matrix / sigma)
    scores = dist_to_protos @ H
    istar = np.argmin(scores, axis=1).astype(np.int64)
    k = lattice.k
    fields = [np.flatnonzero(istar == j) for j in range(k)]
    return istar, fields


def block_sums(D: np.ndarray, istar: np.ndarray, k: int) -> BlockSums:
    """Block sums S(k, l) over the partition given by istar, in O(N^2)."""
    S, sizes, minS = kernels.block_sums(np.ascontiguousarray(D, dtype=float),
                                        np.ascontiguousarray(istar, dtype=np.int64),
                                        k)
    return BlockSums(S=S, field_sizes=sizes, min_per_field=minS)


def _h_matrix(lattice: Lattice, sigma: float) -> np.ndarray:
    return np.exp(-lattice.nd_matrix / sigma)


def block_prototype_update(S: BlockSums, lattice: Lattice, sigma: float) -> np.ndarray:
    """argmin_l sum_k h(nd(k, j)) S(k, l) for every unit, in O(N K^2)."""
    H = _h_matrix(lattice, sigma)
    crit = H.T @ S.S
    return np.array([margin_argmin(row) for row in crit], dtype=np.int64)


def bnb_bounds(S: BlockSums, lattice: Lattice, sigma: float,
               theta_mode: str = "full") -> BoundTable:
    """Per-field lower bounds for the branch-and-bound search.

    theta_mode "self" keeps only the unit's own term h(0) * minS(j, m)
    (O(K^2) total); "full" sums all K terms (O(K^3) total).  Empty fields get
    +inf so the search skips them.
    """
    if theta_mode not in ("self", "full"):
        raise ValueError(f"unknown theta mode {theta_mode!r}")
    minS = S.min_per_field
    k = minS.shape[0]
    empty = S.field_sizes == 0
    if theta_mode == "self":
        eta = minS.T.copy()
    else:
        H = _h_matrix(lattice, sigma)
        finite = np.where(np.isfinite(minS), minS, 0.0)
        eta = finite.T @ H
    eta[empty, :] = np.inf
    return BoundTable(minS=minS, theta_mode=theta_mode, eta=eta)


def _partition_arrays(istar: np.ndarray, k: int):
    # Members grouped by field, ascending index inside each field.
    members = np.argsort(istar, kind="stable").astype(np.int64)
    counts = np.bincount(istar, minlength=k)
    starts = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    return members, starts, counts.astype(np.int64)


def _init_classes(sizes: np.ndarray, lattice: Lattice) -> np.ndarray:
    # Unit j starts its scan in its own field; an empty field falls back to
    # the nearest nonempty one on the lattice (lowest index on ties).
    k = sizes.shape[0]
    init = np.arange(k, dtype=np.int64)
    empties = np.flatnonzero(sizes == 0)
    if empties.size:
        nonempty = np.flatnonzero(sizes > 0)
        for j in empties:
            nd_row = lattice.nd_matrix[j, nonempty]
            init[j] = nonempty[np.argmin(nd_row)]
    return init


def bnb_prototype_search(S: BlockSums, bounds: BoundTable, istar: np.ndarray,
                         lattice: Lattice, sigma: float, early_stop: bool,
                         claimed: np.ndarray | None = None,
                         counters: np.ndarray | None = None,
                         only: int | None = None):
    """Branch-and-bound argmin per unit, identical to block_prototype_update.

    With `only` set, searches a single unit (used to re-resolve collisions
    against a claimed mask).  counters accumulates [evaluated, pruned,
    abandoned].
    """
    k = S.S.shape[0]
    n = S.S.shape[1]
    H = _h_matrix(lattice, sigma)
    horder = np.argsort(-H, axis=0, kind="stable")
    class_order = np.argsort(bounds.eta, axis=0, kind="stable")
    members, starts, sizes = _partition_arrays(istar, k)
    init = _init_classes(sizes, lattice)
    ST = np.ascontiguousarray(S.S.T)
    if claimed is None:
        claimed = np.zeros(n, dtype=bool)
    if counters is None:
        counters = np.zeros(3, dtype=np.int64)
    unit_list = list(range(k)) if only is None else [only]
    choices = np.empty(len(unit_list), dtype=np.int64)
    for pos, j in enumerate(unit_list):
        idx, _ = kernels.som_bnb_search_one(
            ST, np.ascontiguousarray(H[:, j]),
            np.ascontiguousarray(horder[:, j]),
            np.ascontiguousarray(bounds.eta[:, j]),
            np.ascontiguousarray(class_order[:, j]),
            members, starts, sizes, init[j], early_stop, claimed, counters)
        choices[pos] = idx
    return (int(choices[0]) if only is not None else choices), counters


class SomSearchState:
    """Per-epoch search context shared by the SOM implementation variants.

    The naive and branch-and-bound variants claim prototypes sequentially
    against a growing mask (each unit gets its best unclaimed candidate,
    which is the collision-prevention outcome without repeated searches));
    block summing keeps its full criterion table and resolves collisions by
    masked argmin over the affected rows.
    """

    def __init__(self, D, DT, istar, lattice, sigma, impl, alpha=None):
        k = lattice.k
        self.impl = impl
        self.lattice = lattice
        self.sigma = sigma
        self.istar = istar
        self.DT = DT
        self.alpha = alpha
        self.counters = np.zeros(3, dtype=np.int64)
        self.crit = None
        self.bounds = None
        self.S = None
        if impl == "naive":
            pass  # per-unit standard scans over DT with the alpha columns
        elif impl == "block":
            self.S = block_sums(D, istar, k)
            H = _h_matrix(lattice, sigma)
            self.crit = H.T @ self.S.S
        else:
            self.S = block_sums(D, istar, k)
            theta = "self" if impl == "bnb-self" else "full"
            self.bounds = bnb_bounds(self.S, lattice, sigma, theta)
        self.early = impl == "bnb-full-early"

    def select_all(self) -> np.ndarray:
        k = self.lattice.k
        n = self.DT.shape[0]
        if self.crit is not None:
            from .median import resolve_collisions
            proposals = np.array([margin_argmin(row) for row in self.crit],
                                 dtype=np.int64)
            return resolve_collisions(
                proposals, n,
                next_best=lambda j, claimed: margin_argmin(
                    np.where(claimed, np.inf, self.crit[j])))
        claimed = np.zeros(n, dtype=bool)
        loc = np.empty(k, dtype=np.int64)
        for j in range(k):
            if self.impl == "naive":
                c, _ = kernels.standard_scan(
                    self.DT, np.ascontiguousarray(self.alpha[:, j]), claimed,
                    self.counters)
            else:
                c, _ = bnb_prototype_search(self.S, self.bounds, self.istar,
                                            self.lattice, self.sigma,
                                            self.early, claimed=claimed,
                                            counters=self.counters, only=j)
            loc[j] = c
            claimed[c] = True
        return loc
