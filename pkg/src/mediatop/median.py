"""Median clustering over dissimilarity data.

Median NG, median SOM and K-medoids restrict prototype locations to data
points, so arbitrary dissimilarity matrices (no symmetry or triangle
inequality required) can be clustered.  Prototype updates are exhaustive
argmin scans over candidate points; the `implementation` field of the config
selects between the straightforward O(N^2 K) scan and the exact accelerated
searches, all of which return identical prototypes.

Optional per-point labels blend into the training distance as
d_beta = beta * d + (1 - beta) * ||y - Y||^2, pulling cluster borders toward
class borders; the prototype argmin itself stays a pure input-space scan
because the label term does not depend on the candidate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import (AnnealingSchedule, ConfigError, DissimilaritySource,
                   InvariantError, Lattice)
from .fast_ng import NG_IMPLEMENTATIONS, NgSearchState
from .fast_som import SomSearchState

SOM_IMPLEMENTATIONS = ("naive", "block", "bnb-self", "bnb-full", "bnb-full-early")
MEDIAN_ALGORITHMS = ("median-ng", "median-som", "kmedoids")
GENERATOR_NAME = "numpy-pcg64"


@dataclass
class MedianPrototypes:
    """K prototype locations given as data indices, plus soft labels."""

    loc: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.loc = np.asarray(self.loc, dtype=np.int64)
        if self.loc.ndim != 1 or self.loc.size < 1:
            raise ConfigError("prototype locations must be a nonempty index vector")
        if np.unique(self.loc).size != self.loc.size:
            raise ConfigError("prototype locations must be pairwise distinct")

    @property
    def k(self) -> int:
        return self.loc.size


@dataclass(frozen=True)
class SupervisionConfig:
    """Label blending: beta weighs the input distance, 1 - beta the labels.

    beta = 1 (or enabled = False) reproduces the unsupervised run exactly.
    ranks_use_blended controls whether winners and ranks see the blended
    distance (default) or the raw input distance.
    """

    beta: float = 1.0
    enabled: bool = True
    ranks_use_blended: bool = True

    def __post_init__(self):
        if not (0 < self.beta <= 1):
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")


@dataclass
class TrainConfig:
    n_prototypes: int
    epochs: int = 100
    sigma_start: float | None = None
    sigma_end: float = 0.01
    anneal_epochs: int | None = None  # default: anneal over the whole budget
    seed: int = 0
    implementation: str = "naive"
    lattice: Lattice | None = None
    supervision: SupervisionConfig | None = None
    tie_mode: str = "index"  # "index" or "random"


@dataclass
class EpochRecord:
    epoch: int
    sigma: float
    cost: float
    e_half: float
    e_norm: float
    moved: int
    candidates_evaluated: int
    classes_pruned: int
    partial_abandons: int
    wall_time: float
    loc: np.ndarray | None = None  # prototype locations after the update


@dataclass
class MedianModel:
    algorithm: str
    n_prototypes: int
    loc: np.ndarray
    labels: np.ndarray | None
    crisp_classes: np.ndarray | None
    sigma_start: float
    sigma_end: float
    epochs_budget: int
    beta: float
    seed: int
    epochs_run: int
    final_cost: float
    implementation: str
    multiplicity: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


@dataclass
class TrainResult:
    model: MedianModel
    assignment: np.ndarray
    winner_distance: np.ndarray
    history: list[EpochRecord]
    final_e_half: float = 0.0
    final_e_norm: float = 0.0


def blended_distance(d_input: float, y, Y, beta: float) -> float:
    """beta * d + (1 - beta) * ||y - Y||^2; unlabeled points get beta * d."""
    if not (0 < beta <= 1):
        raise ConfigError(f"beta must lie in (0, 1], got {beta}")
    if y is None:
        return beta * d_input
    y = np.asarray(y, dtype=float)
    Y = np.asarray(Y, dtype=float)
    diff = y - Y
    return beta * d_input + (1.0 - beta) * float(np.dot(diff, diff))


def _label_sq_cross(a, b):
    na = (a * a).sum(axis=1)
    nb = (b * b).sum(axis=1)
    out = na[:, None] + nb[None, :] - 2.0 * (a @ b.T)
    np.maximum(out, 0.0, out=out)
    return out


def resolve_collisions(choices, n: int, costs: np.ndarray | None = None,
                       next_best=None) -> np.ndarray:
    """Make the chosen locations pairwise distinct.

    Prototypes are processed in index order; a prototype whose choice is
    already claimed takes its best unclaimed candidate, supplied either by
    the `costs` rows (masked argmin) or by a next_best(j, claimed) callback.
    """
    choices = np.asarray(choices, dtype=np.int64)
    k = choices.size
    if k > n:
        raise ConfigError("more prototypes than candidate locations")
    loc = np.empty(k, dtype=np.int64)
    claimed = np.zeros(n, dtype=bool)
    for j in range(k):
        c = int(choices[j])
        if claimed[c]:
            if next_best is not None:
                c = int(next_best(j, claimed))
            elif costs is not None:
                row = np.where(claimed, np.inf, costs[j])
                m = row.min()
                c = int(np.argmax(row <= m * (1.0 + kernels.EPS_TIE)))
            else:
                raise ConfigError("collision without a cost source to resolve it")
        if claimed[c]:
            raise InvariantError("collision resolution returned a claimed index")
        loc[j] = c
        claimed[c] = True
    return loc


def posterior_label(loc, assignment, labels, label_mask, dcols) -> np.ndarray:
    """Majority class of the labeled points in each receptive field.

    A field without labeled points inherits the class of the labeled point
    nearest to the prototype (dcols holds the point-to-prototype distances).
    Ties resolve to the lowest class index.
    """
    if labels is None or label_mask is None or not np.any(label_mask):
        raise ConfigError("posterior labeling needs labeled data")
    loc = np.asarray(loc, dtype=np.int64)
    labels = np.asarray(labels, dtype=float)
    label_mask = np.asarray(label_mask, dtype=bool)
    k = loc.size
    classes = np.empty(k, dtype=np.int64)
    labeled = np.flatnonzero(label_mask)
    for j in range(k):
        members = np.flatnonzero((assignment == j) & label_mask)
        if members.size:
            votes = labels[members].sum(axis=0)
        else:
            nearest = labeled[np.argmin(dcols[labeled, j])]
            votes = labels[nearest]
        classes[j] = int(np.argmax(votes))
    return classes


class _TrainContext:
    """Inputs and derived constants shared by every epoch of one run."""

    def __init__(self, D, algorithm, config, labels, label_mask, weights,
                 symmetric):
        if isinstance(D, DissimilaritySource):
            symmetric = D.symmetry_declared if symmetric is None else symmetric
            D = D.full()
        self.D = np.ascontiguousarray(D, dtype=float)
        if self.D.ndim != 2 or self.D.shape[0] != self.D.shape[1]:
            raise ConfigError("dissimilarity data must be a square matrix")
        self.n = self.D.shape[0]
        if symmetric is None:
            symmetric = bool(np.array_equal(self.D, self.D.T))
        self.symmetric = symmetric
        self.DT = self.D if symmetric else np.ascontiguousarray(self.D.T)
        self.algorithm = algorithm
        self.config = config
        self.k = config.n_prototypes
        if self.k < 1 or self.k > self.n:
            raise ConfigError(f"need 1 <= K <= N, got K={self.k}, N={self.n}")
        sup = config.supervision
        self.sup_enabled = sup is not None and sup.enabled and labels is not None
        self.beta = sup.beta if self.sup_enabled else 1.0
        self.ranks_blended = sup.ranks_use_blended if self.sup_enabled else True
        self.labels = None if labels is None else np.asarray(labels, dtype=float)
        if self.labels is not None:
            self.label_mask = (np.ones(self.n, dtype=bool) if label_mask is None
                               else np.asarray(label_mask, dtype=bool))
        else:
            self.label_mask = None
        self.weights = (np.ones(self.n) if weights is None
                        else np.ascontiguousarray(weights, dtype=float))
        if self.weights.shape != (self.n,) or np.any(self.weights < 0):
            raise ConfigError("weights must be nonnegative, one per point")
        self.lattice = config.lattice
        if algorithm == "median-som":
            if self.lattice is None or self.lattice.k != self.k:
                raise ConfigError("median SOM needs a lattice with K units")
            if config.implementation not in SOM_IMPLEMENTATIONS:
                raise ConfigError(f"unknown SOM implementation {config.implementation!r}")
        elif algorithm == "median-ng":
            if config.implementation not in NG_IMPLEMENTATIONS:
                raise ConfigError(f"unknown NG implementation {config.implementation!r}")
        elif algorithm != "kmedoids":
            raise ConfigError(f"unknown median algorithm {algorithm!r}")
        if config.tie_mode not in ("index", "random"):
            raise ConfigError(f"unknown tie mode {config.tie_mode!r}")

    def blended(self, dcols, Y):
        if not self.sup_enabled or self.beta == 1.0 or Y is None:
            return dcols
        db = self.beta * dcols
        mask = self.label_mask
        if mask.any():
            db[mask] += (1.0 - self.beta) * _label_sq_cross(self.labels[mask], Y)
        return db


def _initial_labels(ctx, loc):
    if not ctx.sup_enabled:
        return None
    Y = np.zeros((ctx.k, ctx.labels.shape[1]))
    for pos, idx in enumerate(loc):
        if ctx.label_mask[idx]:
            Y[pos] = ctx.labels[idx]
    return Y


def _weighted_label_update(ctx, coeff, Y):
    # coeff[i, j]: contribution of point i to prototype j (weights included).
    if not ctx.sup_enabled:
        return Y
    mask = ctx.label_mask
    cm = coeff[mask]
    denom = cm.sum(axis=0)
    new_Y = Y.copy()
    good = denom > 0
    if good.any():
        new_Y[good] = (cm.T @ ctx.labels[mask])[good] / denom[good, None]
    return new_Y


def _select_random_mode(ctx, coeff, epoch):
    # Tie pools from full criterion rows plus one seeded draw per prototype:
    # every implementation yields the same result in this mode.
    crit = coeff.T @ ctx.D
    loc = np.empty(ctx.k, dtype=np.int64)
    claimed = np.zeros(ctx.n, dtype=bool)
    for j in range(ctx.k):
        rng = np.random.default_rng([ctx.config.seed, epoch, j])
        row = np.where(claimed, np.inf, crit[j])
        m = row.min()
        pool = np.flatnonzero(row <= m * (1.0 + kernels.EPS_TIE))
        c = int(pool[rng.integers(pool.size)])
        loc[j] = c
        claimed[c] = True
    return loc


# Each algorithm provides an assign step (winners/ranks, costs) and a select
# step (new prototype locations plus label update).


def _ng_assign(ctx, loc, Y, sigma):
    dcols = ctx.D[:, loc]
    db = ctx.blended(dcols, Y)
    basis = db if ctx.ranks_blended else dcols
    order = np.argsort(basis, axis=1, kind="stable")
    ranks = np.empty_like(order)
    rows = np.arange(ctx.n)[:, None]
    ranks[rows, order] = np.arange(ctx.k)[None, :]
    winner = order[:, 0].astype(np.int64)
    hk = np.exp(-np.arange(ctx.k) / sigma)
    hw = ctx.weights[:, None] * hk[ranks]
    cost = 0.5 * float((hw * basis).sum())
    wd = dcols[np.arange(ctx.n), winner]
    e_half = 0.5 * float((ctx.weights * wd).sum())
    return dict(assignment=winner, cost=cost, e_half=e_half, dcols=dcols,
                ranks=ranks, hk=hk, hw=hw, winner=winner)


def _ng_select(ctx, a, loc, Y, epoch):
    if ctx.config.tie_mode == "random":
        new_loc = _select_random_mode(ctx, a["hw"], epoch)
        counters = np.zeros(3, dtype=np.int64)
    else:
        state = NgSearchState(ctx.D, ctx.DT, a["ranks"], a["hk"], ctx.weights,
                              a["winner"], loc, ctx.config.implementation)
        new_loc = state.select_all()
        counters = state.counters
    new_Y = _weighted_label_update(ctx, a["hw"], Y)
    return new_loc, new_Y, counters


def _som_assign(ctx, loc, Y, sigma):
    dcols = ctx.D[:, loc]
    db = ctx.blended(dcols, Y)
    basis = db if ctx.ranks_blended else dcols
    H = np.exp(-ctx.lattice.nd_matrix / sigma)
    scores = basis @ H
    istar = np.argmin(scores, axis=1).astype(np.int64)
    cost = 0.5 * float(scores[np.arange(ctx.n), istar].sum())
    wd = dcols[np.arange(ctx.n), istar]
    e_half = 0.5 * float((ctx.weights * wd).sum())
    alpha = ctx.weights[:, None] * H[istar]
    return dict(assignment=istar, cost=cost, e_half=e_half, dcols=dcols,
                istar=istar, alpha=alpha, sigma=sigma)


def _som_select(ctx, a, loc, Y, epoch):
    if ctx.config.tie_mode == "random":
        new_loc = _select_random_mode(ctx, a["alpha"], epoch)
        counters = np.zeros(3, dtype=np.int64)
    else:
        state = SomSearchState(ctx.D, ctx.DT, a["istar"], ctx.lattice,
                               a["sigma"], ctx.config.implementation,
                               alpha=a["alpha"])
        new_loc = state.select_all()
        counters = state.counters
    new_Y = _weighted_label_update(ctx, a["alpha"], Y)
    return new_loc, new_Y, counters


def _kmedoids_assign(ctx, loc, Y, sigma):
    dcols = ctx.D[:, loc]
    db = ctx.blended(dcols, Y)
    basis = db if ctx.ranks_blended else dcols
    winner = np.argmin(basis, axis=1).astype(np.int64)
    sel = np.arange(ctx.n)
    cost = 0.5 * float((ctx.weights * basis[sel, winner]).sum())
    e_half = 0.5 * float((ctx.weights * dcols[sel, winner]).sum())
    return dict(assignment=winner, cost=cost, e_half=e_half, dcols=dcols,
                winner=winner)


def _kmedoids_select(ctx, a, loc, Y, epoch):
    winner = a["winner"]
    proposals = np.empty(ctx.k, dtype=np.int64)
    field_costs = {}
    for j in range(ctx.k):
        members = np.flatnonzero(winner == j)
        if members.size == 0:
            proposals[j] = loc[j]
            continue
        sub = ctx.D[np.ix_(members, members)]
        costs = ctx.weights[members] @ sub
        field_costs[j] = (members, costs)
        proposals[j] = int(members[np.argmin(costs)])

    def next_best(j, claimed):
        if j in field_costs:
            members, costs = field_costs[j]
            masked = np.where(claimed[members], np.inf, costs)
            if np.isfinite(masked).any():
                return int(members[np.argmin(masked)])
        return int(np.flatnonzero(~claimed)[0])

    new_loc = resolve_collisions(proposals, ctx.n, next_best=next_best)
    new_Y = Y
    if ctx.sup_enabled:
        new_Y = Y.copy()
        for j in range(ctx.k):
            members = np.flatnonzero((winner == j) & ctx.label_mask)
            if members.size:
                w = ctx.weights[members]
                new_Y[j] = (w @ ctx.labels[members]) / w.sum()
    return new_loc, new_Y, np.zeros(3, dtype=np.int64)


_STEPS = {"median-ng": (_ng_assign, _ng_select),
          "median-som": (_som_assign, _som_select),
          "kmedoids": (_kmedoids_assign, _kmedoids_select)}


def default_sigma_start(algorithm: str, k: int, lattice: Lattice | None = None) -> float:
    if algorithm == "median-som":
        return max(lattice.diameter() / 2.0, 0.01)
    return max(k / 2.0, 0.01)


def train_median(D, algorithm: str, config: TrainConfig, *, labels=None,
                 label_mask=None, weights=None, init_loc=None,
                 symmetric: bool | None = None,
                 metadata: dict | None = None) -> TrainResult:
    """Run a median clustering algorithm to its fixed point or epoch budget.

    The run stops early once the neighborhood range has reached its final
    value and one more epoch would change neither prototype locations nor
    labels.  History records the cost of the state entering each epoch, so at
    fixed sigma the recorded cost never increases.
    """
    ctx = _TrainContext(D, algorithm, config, labels, label_mask, weights,
                        symmetric)
    rng = np.random.default_rng(np.random.PCG64(config.seed))
    if init_loc is None:
        loc = rng.choice(ctx.n, size=ctx.k, replace=False).astype(np.int64)
    else:
        loc = np.asarray(init_loc, dtype=np.int64)
        if loc.size != ctx.k or np.unique(loc).size != ctx.k:
            raise ConfigError("init_loc must hold K distinct indices")
    Y = _initial_labels(ctx, loc)

    if algorithm == "kmedoids":
        sigma_start = sigma_end = 0.0
        schedule = None
    else:
        sigma_start = (config.sigma_start if config.sigma_start is not None
                       else default_sigma_start(algorithm, ctx.k, ctx.lattice))
        sigma_end = min(config.sigma_end, sigma_start)
        if config.epochs >= 1:
            anneal = config.anneal_epochs or config.epochs
            if anneal < 1 or anneal > config.epochs:
                raise ConfigError("anneal_epochs must lie in [1, epochs]")
            schedule = AnnealingSchedule(sigma_start, sigma_end, anneal)
        else:
            schedule = None

    assign_fn, select_fn = _STEPS[algorithm]
    history: list[EpochRecord] = []
    last_assign = None
    epochs_run = 0
    converged = False
    for t in range(config.epochs):
        sigma = (schedule.sigma_at(min(t, schedule.epochs - 1))
                 if schedule is not None else 1e-12)
        t0 = time.perf_counter()
        a = assign_fn(ctx, loc, Y, sigma)
        new_loc, new_Y, counters = select_fn(ctx, a, loc, Y, t)
        wall = time.perf_counter() - t0
        moved = int(np.sum(new_loc != loc))
        labels_moved = ctx.sup_enabled and not np.array_equal(new_Y, Y)
        history.append(EpochRecord(
            epoch=t, sigma=sigma if schedule is not None else 0.0,
            cost=a["cost"], e_half=a["e_half"],
            e_norm=a["e_half"] / ctx.weights.sum(),
            moved=moved, candidates_evaluated=int(counters[0]),
            classes_pruned=int(counters[1]), partial_abandons=int(counters[2]),
            wall_time=wall, loc=new_loc.copy()))
        loc, Y = new_loc, new_Y
        last_assign = a
        epochs_run = t + 1
        at_end = (schedule is None or t >= schedule.epochs - 1
                  or schedule.sigma_start == schedule.sigma_end)
        if at_end and moved == 0 and not labels_moved:
            converged = True
            break

    if converged and last_assign is not None:
        final = last_assign
    else:
        sigma = sigma_end if (algorithm != "kmedoids" and sigma_end > 0) else 1e-12
        final = assign_fn(ctx, loc, Y, sigma)

    assignment = final["assignment"]
    dcols = final["dcols"]
    winner_distance = dcols[np.arange(ctx.n), assignment]
    crisp = None
    if labels is not None:
        lm = (np.ones(ctx.n, dtype=bool) if label_mask is None
              else np.asarray(label_mask, dtype=bool))
        if ctx.sup_enabled and Y is not None:
            crisp = np.argmax(Y, axis=1).astype(np.int64)
        elif lm.any():
            crisp = posterior_label(loc, assignment,
                                    np.asarray(labels, dtype=float), lm, dcols)

    meta = {"generator": GENERATOR_NAME, "tie_mode": config.tie_mode,
            "symmetric_input": ctx.symmetric}
    if ctx.lattice is not None:
        meta["lattice_shape"] = ctx.lattice.shape
        if ctx.lattice.shape == "hexagonal":
            meta["lattice_nd"] = "hexagonal-axial-euclidean"
    if metadata:
        meta.update(metadata)
    model = MedianModel(
        algorithm=algorithm, n_prototypes=ctx.k, loc=loc, labels=Y,
        crisp_classes=crisp, sigma_start=float(sigma_start),
        sigma_end=float(sigma_end), epochs_budget=config.epochs,
        beta=float(ctx.beta), seed=config.seed, epochs_run=epochs_run,
        final_cost=float(final["cost"]), implementation=config.implementation,
        metadata=meta)
    return TrainResult(model=model, assignment=assignment,
                       winner_distance=winner_distance, history=history,
                       final_e_half=float(final["e_half"]),
                       final_e_norm=float(final["e_half"] / ctx.weights.sum()))


# ---------------------------------------------------------------------------
# Single-epoch reference entry points


def median_ng_epoch(D, protos: MedianPrototypes, sigma: float,
                    supervision: SupervisionConfig | None = None,
                    labels=None, label_mask=None, weights=None,
                    implementation: str = "naive") -> MedianPrototypes:
    """One median NG round: ranks, exhaustive argmin, labels, collisions."""
    cfg = TrainConfig(n_prototypes=protos.k, epochs=1, sigma_start=sigma,
                      sigma_end=sigma, implementation=implementation,
                      supervision=supervision)
    ctx = _TrainContext(D, "median-ng", cfg, labels, label_mask, weights, None)
    Y = protos.labels if ctx.sup_enabled else None
    if ctx.sup_enabled and Y is None:
        Y = _initial_labels(ctx, protos.loc)
    a = _ng_assign(ctx, protos.loc, Y, sigma)
    new_loc, new_Y, _ = _ng_select(ctx, a, protos.loc, Y, 0)
    return MedianPrototypes(loc=new_loc, labels=new_Y)


def median_som_epoch(D, protos: MedianPrototypes, lattice: Lattice,
                     sigma: float, supervision: SupervisionConfig | None = None,
                     labels=None, label_mask=None,
                     implementation: str = "naive") -> MedianPrototypes:
    """One median SOM round with the averaged winner."""
    cfg = TrainConfig(n_prototypes=protos.k, epochs=1, sigma_start=sigma,
                      sigma_end=sigma, implementation=implementation,
                      lattice=lattice, supervision=supervision)
    ctx = _TrainContext(D, "median-som", cfg, labels, label_mask, None, None)
    Y = protos.labels if ctx.sup_enabled else None
    if ctx.sup_enabled and Y is None:
        Y = _initial_labels(ctx, protos.loc)
    a = _som_assign(ctx, protos.loc, Y, sigma)
    new_loc, new_Y, _ = _som_select(ctx, a, protos.loc, Y, 0)
    return MedianPrototypes(loc=new_loc, labels=new_Y)


def kmedoids_epoch(D, protos: MedianPrototypes,
                   supervision: SupervisionConfig | None = None,
                   labels=None, label_mask=None) -> MedianPrototypes:
    """One K-medoids round: winner assignment plus in-field medoid updates."""
    cfg = TrainConfig(n_prototypes=protos.k, epochs=1, supervision=supervision)
    ctx = _TrainContext(D, "kmedoids", cfg, labels, label_mask, None, None)
    Y = protos.labels if ctx.sup_enabled else None
    if ctx.sup_enabled and Y is None:
        Y = _initial_labels(ctx, protos.loc)
    a = _kmedoids_assign(ctx, protos.loc, Y, 0.0)
    new_loc, new_Y, _ = _kmedoids_select(ctx, a, protos.loc, Y, 0)
    return MedianPrototypes(loc=new_loc, labels=new_Y)


def kmedoids(D, k: int, epochs: int = 100, seed: int = 0,
             supervision: SupervisionConfig | None = None, labels=None,
             label_mask=None) -> TrainResult:
    """Classical K-medoids clustering over a dissimilarity matrix."""
    cfg = TrainConfig(n_prototypes=k, epochs=epochs, seed=seed,
                      implementation="naive", supervision=supervision)
    return train_median(D, "kmedoids", cfg, labels=labels,
                        label_mask=label_mask)
