"""Benchmark datasets and synthetic data generators used by tests/scripts."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .data import SequenceDataset, VectorDataset, load_sequence_file

CHROMOSOMES_ENV = "MEDIATOP_CHROMOSOMES"
CHROMOSOMES_LABELS_ENV = "MEDIATOP_CHROMOSOMES_LABELS"


def _one_hot(targets, names):
    out = np.zeros((len(targets), len(names)))
    out[np.arange(len(targets)), targets] = 1.0
    return out


def load_iris() -> VectorDataset:
    """150 flowers, 4 features, 3 classes."""
    from sklearn.datasets import load_iris as _load
    raw = _load()
    return VectorDataset(raw.data.astype(float),
                         labels=_one_hot(raw.target, raw.target_names),
                         class_names=[str(n) for n in raw.target_names])


def load_wdbc() -> VectorDataset:
    """Wisconsin diagnostic breast cancer: 569 points, 30 features, 2 classes."""
    from sklearn.datasets import load_breast_cancer as _load
    raw = _load()
    return VectorDataset(raw.data.astype(float),
                         labels=_one_hot(raw.target, raw.target_names),
                         class_names=[str(n) for n in raw.target_names])


def gaussian_blobs(n: int, dim: int, centers: int, seed: int = 0,
                   spread: float = 1.0, center_box: float = 10.0) -> VectorDataset:
    """Isotropic Gaussian clusters, labeled by generating center."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    mus = rng.uniform(-center_box, center_box, size=(centers, dim))
    which = rng.integers(0, centers, size=n)
    pts = mus[which] + rng.normal(0.0, spread, size=(n, dim))
    names = [f"c{i}" for i in range(centers)]
    return VectorDataset(pts, labels=_one_hot(which, names), class_names=names)


def random_symmetric_dissimilarity(n: int, seed: int = 0) -> np.ndarray:
    """Uniform(0, 1) off-diagonal dissimilarities, exactly symmetric."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    upper = np.triu(rng.random((n, n)), 1)
    return upper + upper.T


def blob_dissimilarity(n: int, dim: int = 16, centers: int = 22,
                       seed: int = 0) -> np.ndarray:
    """Squared Euclidean matrix of clustered synthetic points."""
    ds = gaussian_blobs(n, dim, centers, seed=seed)
    pts = ds.points
    sq = (pts * pts).sum(axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(d, 0.0, out=d)
    upper = np.triu(d, 1)
    return upper + upper.T


def chromosomes_path() -> Path | None:
    p = os.environ.get(CHROMOSOMES_ENV)
    if p and Path(p).exists():
        return Path(p)
    return None


def load_chromosomes(path=None, labels_path=None) -> SequenceDataset | None:
    """Profile strings of the chromosomes benchmark, if configured.

    Profiles come one per line (whitespace-separated reals); classes come
    from a separate file with one label per line, configured via
    MEDIATOP_CHROMOSOMES_LABELS.  Returns None when no profile file is
    configured (the dataset is not redistributable here).
    """
    path = Path(path) if path else chromosomes_path()
    if path is None or not Path(path).exists():
        return None
    ds = load_sequence_file(path)
    labels_path = labels_path or os.environ.get(CHROMOSOMES_LABELS_ENV)
    if labels_path and Path(labels_path).exists():
        names = [ln.strip() for ln in Path(labels_path).read_text().splitlines()
                 if ln.strip()]
        classes = sorted(set(names))
        idx = {c: i for i, c in enumerate(classes)}
        onehot = np.zeros((len(names), len(classes)))
        for i, c in enumerate(names):
            onehot[i, idx[c]] = 1.0
        ds = SequenceDataset(ds.sequences, labels=onehot, class_names=classes)
    return ds
