"""Batch K-means, batch neural gas and batch SOM for vector data.

These are the unrestricted baselines the median variants are compared
against; all three alternate optimal assignments with closed-form prototype
updates and therefore converge in a finite number of epochs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import AnnealingSchedule, ConfigError, Lattice, VectorDataset


@dataclass
class EuclideanPrototypes:
    """K prototype vectors in the data space."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=float)
        if self.w.ndim != 2 or self.w.shape[0] < 1:
            raise ConfigError("prototypes must form a K x M matrix")
        if not np.all(np.isfinite(self.w)):
            raise ConfigError("prototypes must be finite")

    @property
    def k(self) -> int:
        return self.w.shape[0]


@dataclass
class AssignmentState:
    """Winner indices plus the optional NG rank table and SOM winners."""

    winner: np.ndarray
    ranks: np.ndarray | None = None
    som_winner: np.ndarray | None = None


@dataclass
class QuantizationError:
    """Summed winner distortion, halved (e_half) and per point (e_norm)."""

    e_half: float
    e_norm: float


@dataclass
class BatchResult:
    prototypes: EuclideanPrototypes
    assignment: AssignmentState
    history: list[dict] = field(default_factory=list)
    epochs_run: int = 0
    seed: int = 0
    algorithm: str = ""


def _pairwise_sq(points, w):
    # (N, K) table of squared Euclidean distances, computed by direct
    # differences so near-zero values stay exact.
    diff = points[:, None, :] - w[None, :, :]
    return np.einsum("nkm,nkm->nk", diff, diff)


def winner_index(x, prototypes: EuclideanPrototypes) -> int:
    """Index of the closest prototype, lowest index on ties."""
    x = np.asarray(x, dtype=float)
    if prototypes.k < 1:
        raise ConfigError("empty prototype set")
    d = ((prototypes.w - x) ** 2).sum(axis=1)
    return int(np.argmin(d))


def rank_table(dist_nk: np.ndarray) -> np.ndarray:
    """Ranks of prototypes per point; ties broken by prototype index.

    Row i is a permutation of 0..K-1 with ranks[i, j] = position of
    prototype j in the distance ordering from point i (0 = winner).
    """
    order = np.argsort(dist_nk, axis=1, kind="stable")
    ranks = np.empty_like(order)
    rows = np.arange(dist_nk.shape[0])[:, None]
    ranks[rows, order] = np.arange(dist_nk.shape[1])[None, :]
    return ranks


def compute_ranks(x, prototypes: EuclideanPrototypes) -> np.ndarray:
    """Rank of every prototype for a single point."""
    x = np.asarray(x, dtype=float)
    d = ((prototypes.w - x) ** 2).sum(axis=1)
    return rank_table(d[None, :])[0]


def quantization_error(data, prototypes, winner) -> QuantizationError:
    """Half the summed distortion between points and their winners.

    Accepts either a VectorDataset/array with EuclideanPrototypes, or a
    square dissimilarity matrix with prototype data indices.
    """
    winner = np.asarray(winner, dtype=np.int64)
    if isinstance(prototypes, EuclideanPrototypes):
        points = data.points if isinstance(data, VectorDataset) else np.asarray(data, dtype=float)
        diff = points - prototypes.w[winner]
        total = float(np.einsum("nm,nm->", diff, diff))
    else:
        matrix = data.full() if hasattr(data, "full") else np.asarray(data, dtype=float)
        loc = np.asarray(prototypes, dtype=np.int64)
        total = float(matrix[np.arange(matrix.shape[0]), loc[winner]].sum())
    n = winner.shape[0]
    return QuantizationError(e_half=0.5 * total, e_norm=0.5 * total / n)


def _init_prototypes(points, k, seed):
    n = points.shape[0]
    if k > n:
        raise ConfigError(f"cannot place {k} prototypes on {n} points")
    rng = np.random.default_rng(np.random.PCG64(seed))
    idx = rng.choice(n, size=k, replace=False)
    return points[idx].copy()


def batch_kmeans(data, k: int, epochs: int = 100, init_seed: int = 0) -> BatchResult:
    """Alternate winner assignment and receptive-field means until stable.

    Empty clusters are re-seeded at the point farthest from its current
    winner, so K effective prototypes survive.
    """
    points = data.points if isinstance(data, VectorDataset) else np.asarray(data, dtype=float)
    w = _init_prototypes(points, k, init_seed)
    n = points.shape[0]
    history = []
    prev_winner = None
    epochs_run = 0
    for _ in range(epochs):
        dist = _pairwise_sq(points, w)
        winner = np.argmin(dist, axis=1)
        wd = dist[np.arange(n), winner]
        history.append({"cost": 0.5 * float(wd.sum()),
                        "e_half": 0.5 * float(wd.sum())})
        if prev_winner is not None and np.array_equal(winner, prev_winner):
            break
        epochs_run += 1
        counts = np.bincount(winner, minlength=k)
        new_w = w.copy()
        for j in range(k):
            if counts[j] > 0:
                new_w[j] = points[winner == j].mean(axis=0)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            order = np.lexsort((np.arange(n), -wd))
            used = 0
            for j in empties:
                new_w[j] = points[order[used]]
                used += 1
        w = new_w
        prev_winner = winner
    dist = _pairwise_sq(points, w)
    winner = np.argmin(dist, axis=1)
    protos = EuclideanPrototypes(w)
    return BatchResult(protos, AssignmentState(winner=winner), history,
                       epochs_run=epochs_run, seed=init_seed, algorithm="batch-kmeans")


def default_schedule_ng(k: int, epochs: int, sigma_end: float = 0.01) -> AnnealingSchedule:
    start = max(k / 2.0, sigma_end)
    return AnnealingSchedule(start, sigma_end, epochs)


def default_schedule_som(lattice: Lattice, epochs: int, sigma_end: float = 0.01) -> AnnealingSchedule:
    start = max(lattice.diameter() / 2.0, sigma_end)
    return AnnealingSchedule(start, sigma_end, epochs)


def batch_ng(data, k: int, schedule: AnnealingSchedule, init_seed: int = 0) -> BatchResult:
    """Batch neural gas: rank-weighted means with an annealed range."""
    points = data.points if isinstance(data, VectorDataset) else np.asarray(data, dtype=float)
    w = _init_prototypes(points, k, init_seed)
    n = points.shape[0]
    history = []
    prev_ranks = None
    epochs_run = 0
    T = schedule.epochs
    for t in range(T):
        sigma = schedule.sigma_at(t)
        dist = _pairwise_sq(points, w)
        ranks = rank_table(dist)
        hk = np.exp(-np.arange(k) / sigma)
        hw = hk[ranks]
        winner = np.argmin(dist, axis=1)
        wd = dist[np.arange(n), winner]
        history.append({"sigma": sigma,
                        "cost": 0.5 * float((hw * dist).sum()),
                        "e_half": 0.5 * float(wd.sum())})
        at_end = t >= T - 1 or schedule.sigma_start == schedule.sigma_end
        if at_end and prev_ranks is not None and np.array_equal(ranks, prev_ranks):
            break
        epochs_run += 1
        denom = hw.sum(axis=0)
        good = denom > 0
        w = w.copy()
        w[good] = (hw.T @ points)[good] / denom[good, None]
        prev_ranks = ranks
    dist = _pairwise_sq(points, w)
    ranks = rank_table(dist)
    winner = np.argmin(dist, axis=1)
    return BatchResult(EuclideanPrototypes(w),
                       AssignmentState(winner=winner, ranks=ranks),
                       history, epochs_run=epochs_run, seed=init_seed,
                       algorithm="batch-ng")


def som_winner(x, prototypes: EuclideanPrototypes, lattice: Lattice, sigma: float) -> int:
    """Unit closest to x when distances are averaged over the neighborhood."""
    x = np.asarray(x, dtype=float)
    d = ((prototypes.w - x) ** 2).sum(axis=1)
    H = np.exp(-lattice.nd_matrix / sigma)
    return int(np.argmin(H @ d))


def batch_som(data, lattice: Lattice, schedule: AnnealingSchedule,
              init_seed: int = 0) -> BatchResult:
    """Batch SOM in the averaged-winner formulation.

    Assignments use the neighborhood-averaged winner, updates the
    neighborhood-weighted means; a unit whose weight mass vanishes keeps its
    position for that epoch.
    """
    points = data.points if isinstance(data, VectorDataset) else np.asarray(data, dtype=float)
    k = lattice.k
    w = _init_prototypes(points, k, init_seed)
    n = points.shape[0]
    history = []
    prev_istar = None
    epochs_run = 0
    T = schedule.epochs
    for t in range(T):
        sigma = schedule.sigma_at(t)
        H = np.exp(-lattice.nd_matrix / sigma)
        dist = _pairwise_sq(points, w)
        scores = dist @ H
        istar = np.argmin(scores, axis=1)
        winner = np.argmin(dist, axis=1)
        wd = dist[np.arange(n), winner]
        history.append({"sigma": sigma,
                        "cost": 0.5 * float(scores[np.arange(n), istar].sum()),
                        "e_half": 0.5 * float(wd.sum())})
        at_end = t >= T - 1 or schedule.sigma_start == schedule.sigma_end
        if at_end and prev_istar is not None and np.array_equal(istar, prev_istar):
            break
        epochs_run += 1
        alpha = H[istar]
        denom = alpha.sum(axis=0)
        good = denom > 0
        w = w.copy()
        w[good] = (alpha.T @ points)[good] / denom[good, None]
        prev_istar = istar
    dist = _pairwise_sq(points, w)
    winner = np.argmin(dist, axis=1)
    sigma_final = schedule.sigma_end
    H = np.exp(-lattice.nd_matrix / sigma_final)
    istar = np.argmin(dist @ H, axis=1)
    return BatchResult(EuclideanPrototypes(w),
                       AssignmentState(winner=winner, som_winner=istar),
                       history, epochs_run=epochs_run, seed=init_seed,
                       algorithm="batch-som")
