"""Data containers, dissimilarity metrics, neighborhood weights and lattices.

Everything downstream (batch and median training, the accelerated searches,
patch processing) works against the types defined here: vector and sequence
datasets, dissimilarity sources with random access d(i, j), annealing
schedules, and prototype lattice geometry.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels

VECTOR_METRICS = ("sqeuclidean", "cosine")
SEQUENCE_METRICS = ("edit",)
DEFAULT_INDEL_COST = 4.5


class ConfigError(ValueError):
    """Invalid algorithm or experiment configuration."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class InvariantError(RuntimeError):
    """An internal cross-check failed; results cannot be trusted."""


def neighborhood_weight(t: float, sigma: float) -> float:
    """Neighborhood weight exp(-t / sigma); equals 1 at t = 0."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return float(np.exp(-t / sigma))


@dataclass(frozen=True)
class AnnealingSchedule:
    """Geometric decay of the neighborhood range over a fixed epoch budget.

    sigma(t) = sigma_start * (sigma_end / sigma_start) ** (t / (T - 1)), so
    the range starts at sigma_start, ends exactly at sigma_end, and a
    single-epoch schedule stays at sigma_start.
    """

    sigma_start: float
    sigma_end: float
    epochs: int

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("schedule needs at least one epoch")
        if not (self.sigma_start >= self.sigma_end > 0):
            raise ConfigError(
                "need sigma_start >= sigma_end > 0, got "
                f"{self.sigma_start} -> {self.sigma_end}")

    def sigma_at(self, epoch: int) -> float:
        return sigma_at(self, epoch)


def sigma_at(schedule: AnnealingSchedule, epoch: int) -> float:
    """Neighborhood range at a given epoch of the schedule."""
    T = schedule.epochs
    if not 0 <= epoch < T:
        raise ValueError(f"epoch {epoch} outside schedule range [0, {T})")
    if T == 1 or epoch == 0:
        return schedule.sigma_start
    if epoch == T - 1:
        return schedule.sigma_end
    ratio = schedule.sigma_end / schedule.sigma_start
    return float(schedule.sigma_start * ratio ** (epoch / (T - 1)))


def squared_euclidean(x, y) -> float:
    """Sum of squared coordinate differences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.dot(d, d))


def cosine_dissimilarity(x, y) -> float:
    """1 - cos(x, y); in [0, 2] for nonzero vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ValueError("cosine dissimilarity undefined for zero vectors")
    return float(1.0 - np.dot(x, y) / (nx * ny))


def weighted_edit_distance(a, b, indel_cost: float = DEFAULT_INDEL_COST) -> float:
    """Edit distance where substituting u by v costs |u - v|.

    Insertions and deletions cost `indel_cost` each.  Symmetric, zero exactly
    for equal sequences.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0 or b.size == 0:
        raise ValueError("sequences must be nonempty 1-d arrays")
    if indel_cost <= 0:
        raise ValueError("indel_cost must be positive")
    return float(kernels.edit_distance(a, b, indel_cost))


@dataclass
class VectorDataset:
    """N points in R^M with optional per-point labels in one-hot coding.

    labels rows may be fuzzy (entries in [0, 1] summing to 1); label_mask
    marks which points actually carry a label.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    label_mask: np.ndarray | None = None
    class_names: list[str] | None = None

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] < 1 or self.points.shape[1] < 1:
            raise DataError("points must be a nonempty N x M matrix")
        if not np.all(np.isfinite(self.points)):
            raise DataError("points contain non-finite values")
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=float)
            if self.labels.shape[0] != self.points.shape[0]:
                raise DataError("labels row count differs from points")
            if self.label_mask is None:
                self.label_mask = np.ones(self.points.shape[0], dtype=bool)
            else:
                self.label_mask = np.asarray(self.label_mask, dtype=bool)
            masked = self.labels[self.label_mask]
            if masked.size:
                if masked.min() < -1e-12 or masked.max() > 1 + 1e-12:
                    raise DataError("label entries must lie in [0, 1]")
                sums = masked.sum(axis=1)
                if np.any(np.abs(sums - 1.0) > 1e-9):
                    raise DataError("each labeled row must sum to 1")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def crisp_classes(self) -> np.ndarray | None:
        """Integer class per labeled point (-1 where unlabeled)."""
        if self.labels is None:
            return None
        out = np.full(self.n, -1, dtype=np.int64)
        out[self.label_mask] = np.argmax(self.labels[self.label_mask], axis=1)
        return out


@dataclass
class SequenceDataset:
    """Variable-length real-valued sequences (e.g. grey-level profiles)."""

    sequences: list[np.ndarray]
    labels: np.ndarray | None = None
    label_mask: np.ndarray | None = None
    class_names: list[str] | None = None

    def __post_init__(self):
        seqs = []
        for s in self.sequences:
            arr = np.asarray(s, dtype=float)
            if arr.ndim != 1 or arr.size < 1:
                raise DataError("every sequence must be a nonempty 1-d array")
            if not np.all(np.isfinite(arr)):
                raise DataError("sequence entries must be finite")
            seqs.append(arr)
        if not seqs:
            raise DataError("dataset holds no sequences")
        self.sequences = seqs
        if self.labels is not None and self.label_mask is None:
            self.label_mask = np.ones(len(seqs), dtype=bool)

    @property
    def n(self) -> int:
        return len(self.sequences)


def zscore_standardize(data: VectorDataset, convention: str = "population") -> VectorDataset:
    """Center each column and scale it to unit standard deviation.

    convention selects the divisor: "population" uses N, "sample" uses N - 1.
    Zero-variance columns are centered only.  Labels pass through unchanged.
    """
    if convention not in ("population", "sample"):
        raise ConfigError(f"unknown z-score convention {convention!r}")
    pts = data.points
    if pts.shape[0] < 2:
        raise DataError("z-scoring needs at least two points")
    ddof = 0 if convention == "population" else 1
    mean = pts.mean(axis=0)
    sd = pts.std(axis=0, ddof=ddof)
    safe = np.where(sd > 0, sd, 1.0)
    out = (pts - mean) / safe
    return VectorDataset(out, labels=data.labels, label_mask=data.label_mask,
                         class_names=data.class_names)


# ---------------------------------------------------------------------------
# Dissimilarity sources


class DissimilaritySource:
    """Random-access provider of pairwise dissimilarities d(i, j).

    Access must be side-effect free and safe for concurrent readers.  Blocks
    are the preferred bulk interface; `symmetric_block` builds a submatrix
    from its upper triangle only, which both halves the entry reads and
    guarantees exact symmetry of the result.
    """

    size: int = 0
    symmetry_declared: bool = False

    def access(self, i: int, j: int) -> float:
        raise NotImplementedError

    def block(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        out = np.empty((rows.size, cols.size))
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                out[a, b] = self.access(int(i), int(j))
        return out

    def symmetric_block(self, idx) -> np.ndarray:
        if not self.symmetry_declared:
            raise ConfigError("symmetric_block requires a symmetric source")
        idx = np.asarray(idx, dtype=np.int64)
        n = idx.size
        out = np.zeros((n, n))
        for a in range(n):
            for b in range(a + 1, n):
                v = self.access(int(idx[a]), int(idx[b]))
                out[a, b] = v
                out[b, a] = v
        return out

    def full(self) -> np.ndarray:
        all_idx = np.arange(self.size, dtype=np.int64)
        if self.symmetry_declared:
            return self.symmetric_block(all_idx)
        return self.block(all_idx, all_idx)


class MatrixSource(DissimilaritySource):
    """In-memory dense dissimilarity matrix."""

    def __init__(self, matrix: np.ndarray, symmetric: bool | None = None):
        m = np.ascontiguousarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DataError("dissimilarity matrix must be square")
        self.matrix = m
        self.size = m.shape[0]
        if symmetric is None:
            symmetric = bool(np.array_equal(m, m.T))
        self.symmetry_declared = symmetric

    def access(self, i, j):
        return float(self.matrix[i, j])

    def block(self, rows, cols):
        return self.matrix[np.ix_(np.asarray(rows, dtype=np.int64),
                                  np.asarray(cols, dtype=np.int64))].copy()

    def symmetric_block(self, idx):
        if not self.symmetry_declared:
            raise ConfigError("symmetric_block requires a symmetric source")
        sub = self.block(idx, idx)
        upper = np.triu(sub, 1)
        return upper + upper.T

    def full(self):
        return self.matrix


class MetricSource(DissimilaritySource):
    """Dissimilarities evaluated on the fly from a dataset and a metric id."""

    def __init__(self, data: VectorDataset | SequenceDataset, metric: str,
                 indel_cost: float = DEFAULT_INDEL_COST):
        _check_metric(data, metric)
        self.data = data
        self.metric = metric
        self.indel_cost = indel_cost
        self.size = data.n
        self.symmetry_declared = True
        if isinstance(data, VectorDataset) and metric == "cosine":
            norms = np.linalg.norm(data.points, axis=1)
            if np.any(norms == 0):
                raise ValueError("cosine dissimilarity undefined for zero vectors")

    def access(self, i, j):
        if i == j:
            return 0.0
        if isinstance(self.data, SequenceDataset):
            return weighted_edit_distance(self.data.sequences[i],
                                          self.data.sequences[j],
                                          self.indel_cost)
        x = self.data.points[i]
        y = self.data.points[j]
        if self.metric == "sqeuclidean":
            return squared_euclidean(x, y)
        return cosine_dissimilarity(x, y)

    def block(self, rows, cols):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if isinstance(self.data, SequenceDataset):
            return super().block(rows, cols)
        a = self.data.points[rows]
        b = self.data.points[cols]
        if self.metric == "sqeuclidean":
            out = _sqeuclidean_cross(a, b)
        else:
            out = _cosine_cross(a, b)
        same = rows[:, None] == cols[None, :]
        out[same] = 0.0
        return out

    def symmetric_block(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        if isinstance(self.data, SequenceDataset):
            padded, lengths = _pad_sequences([self.data.sequences[i] for i in idx])
            return kernels.pairwise_edit(padded, lengths, self.indel_cost)
        sub = self.block(idx, idx)
        upper = np.triu(sub, 1)
        return upper + upper.T


class CountingSource(DissimilaritySource):
    """Wrapper that counts how many matrix entries the consumer has read.

    symmetric_block charges n(n-1)/2 entries (the upper triangle actually
    needed), plain blocks charge rows x cols.  With track_touched, a boolean
    matrix records exactly which entries were ever served.
    """

    def __init__(self, inner: DissimilaritySource, track_touched: bool = False):
        self.inner = inner
        self.size = inner.size
        self.symmetry_declared = inner.symmetry_declared
        self.entries_read = 0
        self.touched = np.zeros((inner.size, inner.size), dtype=bool) if track_touched else None

    def access(self, i, j):
        self.entries_read += 1
        if self.touched is not None:
            self.touched[i, j] = True
        return self.inner.access(i, j)

    def block(self, rows, cols):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        self.entries_read += rows.size * cols.size
        if self.touched is not None:
            self.touched[np.ix_(rows, cols)] = True
        return self.inner.block(rows, cols)

    def symmetric_block(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        n = idx.size
        self.entries_read += n * (n - 1) // 2
        if self.touched is not None:
            sub = np.triu(np.ones((n, n), dtype=bool), 1)
            grid = np.ix_(idx, idx)
            cur = self.touched[grid]
            self.touched[grid] = cur | sub
        return self.inner.symmetric_block(idx)


def _check_metric(data, metric):
    if isinstance(data, SequenceDataset):
        if metric not in SEQUENCE_METRICS:
            raise ConfigError(f"metric {metric!r} does not apply to sequences")
    elif isinstance(data, VectorDataset):
        if metric not in VECTOR_METRICS:
            raise ConfigError(f"metric {metric!r} does not apply to vectors")
    else:
        raise ConfigError(f"unsupported dataset type {type(data).__name__}")


def _sqeuclidean_cross(a, b):
    na = (a * a).sum(axis=1)
    nb = (b * b).sum(axis=1)
    out = na[:, None] + nb[None, :] - 2.0 * (a @ b.T)
    np.maximum(out, 0.0, out=out)
    return out


def _cosine_cross(a, b):
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("cosine dissimilarity undefined for zero vectors")
    out = 1.0 - (a / na[:, None]) @ (b / nb[:, None]).T
    np.clip(out, 0.0, 2.0, out=out)
    return out


def _pad_sequences(seqs):
    lengths = np.array([s.size for s in seqs], dtype=np.int64)
    padded = np.zeros((len(seqs), int(lengths.max())))
    for i, s in enumerate(seqs):
        padded[i, :s.size] = s
    return padded, lengths


def materialize_dissimilarity(data, metric: str,
                              indel_cost: float = DEFAULT_INDEL_COST) -> MatrixSource:
    """Evaluate the metric on all pairs and return an in-memory source.

    The result is exactly symmetric with a zero diagonal for all built-in
    metrics.
    """
    src = MetricSource(data, metric, indel_cost)
    matrix = src.symmetric_block(np.arange(data.n, dtype=np.int64))
    return MatrixSource(matrix, symmetric=True)


def validate_source(source: DissimilaritySource, sample_pairs: int = 200,
                    seed: int = 0) -> None:
    """Check the source invariants on the diagonal and sampled pairs."""
    n = source.size
    if n < 1:
        raise DataError("empty dissimilarity source")
    rng = np.random.default_rng(seed)
    diag_idx = np.arange(n) if n <= sample_pairs else rng.choice(n, sample_pairs, replace=False)
    for i in diag_idx:
        if source.access(int(i), int(i)) != 0.0:
            raise DataError(f"d({i},{i}) must be 0")
    pairs = rng.integers(0, n, size=(sample_pairs, 2))
    for i, j in pairs:
        v = source.access(int(i), int(j))
        if not np.isfinite(v) or v < 0:
            raise DataError(f"d({i},{j}) = {v} violates nonnegativity/finiteness")
        if source.symmetry_declared:
            w = source.access(int(j), int(i))
            if v != w:
                raise DataError(f"declared-symmetric source has d({i},{j}) != d({j},{i})")


# ---------------------------------------------------------------------------
# Lattice geometry


@dataclass(frozen=True, eq=False)
class Lattice:
    """Fixed neighborhood structure of SOM units with distances nd(j, l).

    Rectangular grids use Euclidean distance between integer grid positions;
    hexagonal grids use Euclidean distance between axial-coordinate positions
    (recorded in output metadata as "hexagonal-axial-euclidean").
    """

    nd_matrix: np.ndarray
    shape: str = "explicit"
    rows: int | None = None
    cols: int | None = None

    def __post_init__(self):
        m = np.ascontiguousarray(self.nd_matrix, dtype=float)
        object.__setattr__(self, "nd_matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError("lattice distance table must be square")
        if np.any(np.diag(m) != 0):
            raise ConfigError("lattice distances must vanish on the diagonal")
        if not np.array_equal(m, m.T):
            raise ConfigError("lattice distances must be symmetric")
        off = m[~np.eye(m.shape[0], dtype=bool)]
        if off.size and off.min() <= 0:
            raise ConfigError("distinct units must have positive distance")

    @property
    def k(self) -> int:
        return self.nd_matrix.shape[0]

    def nd(self, j: int, l: int) -> float:
        return float(self.nd_matrix[j, l])

    def diameter(self) -> float:
        return float(self.nd_matrix.max())

    @classmethod
    def rectangular(cls, rows: int, cols: int) -> "Lattice":
        pos = _grid_positions(rows, cols, hexagonal=False)
        return cls(_position_distances(pos), shape="rectangular", rows=rows, cols=cols)

    @classmethod
    def hexagonal(cls, rows: int, cols: int) -> "Lattice":
        pos = _grid_positions(rows, cols, hexagonal=True)
        return cls(_position_distances(pos), shape="hexagonal", rows=rows, cols=cols)

    @classmethod
    def chain(cls, k: int) -> "Lattice":
        return cls.rectangular(1, k)

    @classmethod
    def from_distances(cls, table: np.ndarray) -> "Lattice":
        return cls(table, shape="explicit")


def _grid_positions(rows, cols, hexagonal):
    if rows < 1 or cols < 1:
        raise ConfigError("grid dimensions must be positive")
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    r = r.ravel().astype(float)
    c = c.ravel().astype(float)
    if hexagonal:
        x = c + 0.5 * r
        y = r * (np.sqrt(3.0) / 2.0)
    else:
        x, y = c, r
    return np.column_stack([x, y])


def _position_distances(pos):
    d = pos[:, None, :] - pos[None, :, :]
    return np.sqrt((d * d).sum(axis=2))


# ---------------------------------------------------------------------------
# File formats

DSM_MAGIC = b"DSM1"


def load_vector_file(path, labels: str = "none") -> VectorDataset:
    """Read delimited text, one point per row.

    labels="last" treats the final column as a string class label and encodes
    it one-hot (classes ordered by sorted name).
    """
    rows = []
    names = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        rows.append(parts)
    if not rows:
        raise DataError(f"no data rows in {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DataError("rows have inconsistent column counts")
    try:
        if labels == "last":
            if width < 2:
                raise DataError("label column requested but only one column present")
            points = np.array([[float(v) for v in r[:-1]] for r in rows])
            names = [r[-1] for r in rows]
        else:
            points = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise DataError(f"non-numeric value in {path}: {exc}") from exc
    if labels == "last":
        classes = sorted(set(names))
        idx = {c: i for i, c in enumerate(classes)}
        onehot = np.zeros((len(names), len(classes)))
        for i, c in enumerate(names):
            onehot[i, idx[c]] = 1.0
        return VectorDataset(points, labels=onehot, class_names=classes)
    return VectorDataset(points)


def load_sequence_file(path) -> SequenceDataset:
    """One sequence per line, whitespace-separated real entries."""
    seqs = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            seqs.append(np.array([float(v) for v in line.split()]))
        except ValueError as exc:
            raise DataError(f"non-numeric sequence entry in {path}: {exc}") from exc
    if not seqs:
        raise DataError(f"no sequences in {path}")
    return SequenceDataset(seqs)


def save_dissimilarity(path, matrix: np.ndarray, fmt: str = "binary") -> None:
    """Write a dense matrix as text ("N" header) or binary (DSM1 magic)."""
    matrix = np.ascontiguousarray(matrix, dtype=float)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise DataError("dissimilarity matrix must be square")
    path = Path(path)
    if fmt == "text":
        with path.open("w") as fh:
            fh.write(f"{n}\n")
            for row in matrix:
                fh.write(" ".join(repr(float(v)) for v in row))
                fh.write("\n")
    elif fmt == "binary":
        with path.open("wb") as fh:
            fh.write(DSM_MAGIC)
            fh.write(struct.pack("<Q", n))
            fh.write(matrix.astype("<f8").tobytes(order="C"))
    else:
        raise ConfigError(f"unknown dissimilarity format {fmt!r}")


def load_dissimilarity(path) -> MatrixSource:
    """Read a matrix written by save_dissimilarity (format auto-detected)."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(4)
        if head == DSM_MAGIC:
            (n,) = struct.unpack("<Q", fh.read(8))
            data = np.frombuffer(fh.read(8 * n * n), dtype="<f8")
            if data.size != n * n:
                raise DataError(f"binary matrix in {path} is truncated")
            return MatrixSource(data.reshape(n, n).astype(float))
    text = path.read_text().split()
    if not text:
        raise DataError(f"empty dissimilarity file {path}")
    try:
        n = int(text[0])
        values = np.array([float(v) for v in text[1:]])
    except ValueError as exc:
        raise DataError(f"malformed dissimilarity file {path}: {exc}") from exc
    if values.size != n * n:
        raise DataError(f"expected {n * n} entries in {path}, found {values.size}")
    return MatrixSource(values.reshape(n, n))
