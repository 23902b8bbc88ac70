"""Dataset plumbing for classification experiments.

CSV in and out, PCA dimensionality reduction, per-sample normalization
for amplitude loading, deterministic train/test splitting and class
balancing, and the binary metrics (accuracy, AUC, confusion matrix)
used by the training history and the CLI reports.

Everything here is read-only after construction and safe to share
across threads.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionTooSmall,
    NonBinaryLabel,
    OrthoNNError,
    ParseError,
    RankDeficient,
    SingleClass,
)

__all__ = [
    "Dataset",
    "PcaModel",
    "load_csv",
    "save_csv",
    "fit_pca",
    "transform",
    "evaluate",
    "metrics_to_csv",
    "normalize_rows",
    "split_dataset",
    "balance_dataset",
    "toy_dataset_path",
]


def _frozen_array(values, dtype):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """An m x d feature matrix with binary labels.

    ``names`` optionally carries one string per feature column.
    """

    features: np.ndarray
    labels: np.ndarray
    names: tuple | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise DimensionMismatch("features must be a 2-D matrix")
        m, d = feats.shape
        if m < 2:
            raise DimensionTooSmall("a dataset needs at least 2 samples")
        if d < 1:
            raise DimensionTooSmall("a dataset needs at least 1 feature")
        if not np.all(np.isfinite(feats)):
            raise OrthoNNError("features contain NaN or Inf")
        labels = np.asarray(self.labels)
        if labels.shape != (m,):
            raise DimensionMismatch(
                f"expected {m} labels, got shape {labels.shape}"
            )
        if not np.all(np.isin(labels, (0, 1))):
            raise NonBinaryLabel("labels must all be 0 or 1")
        if self.names is not None:
            names = tuple(str(n) for n in self.names)
            if len(names) != d:
                raise DimensionMismatch(
                    f"expected {d} feature names, got {len(names)}"
                )
            object.__setattr__(self, "names", names)
        object.__setattr__(self, "features", _frozen_array(feats, np.float64))
        object.__setattr__(self, "labels", _frozen_array(labels, np.int64))

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]


@dataclass(frozen=True, eq=False)
class PcaModel:
    """A fitted PCA basis: mean vector plus k orthonormal component rows."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        mean = _frozen_array(self.mean, np.float64)
        comps = _frozen_array(self.components, np.float64)
        ev = _frozen_array(self.explained_variance, np.float64)
        if mean.ndim != 1 or comps.ndim != 2 or ev.ndim != 1:
            raise DimensionMismatch("malformed PCA model arrays")
        k, d = comps.shape
        if mean.shape != (d,) or ev.shape != (k,) or k > d:
            raise DimensionMismatch("inconsistent PCA model shapes")
        gram = comps @ comps.T
        if np.max(np.abs(gram - np.eye(k))) > 1e-8:
            raise OrthoNNError("PCA components are not orthonormal")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "explained_variance", ev)

    @property
    def k(self):
        return self.components.shape[0]


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def load_csv(path, label_column="label"):
    """Parse a header-row CSV into a :class:`Dataset`.

    Every non-label column must hold finite numbers.  Rows are reported
    1-based (the header does not count) in error messages.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if label_column not in header:
            raise ParseError(
                f"{path}: no '{label_column}' column in header {header}"
            )
        label_index = header.index(label_column)
        names = tuple(
            h for i, h in enumerate(header) if i != label_index
        )
        feature_rows = []
        labels = []
        for row_number, row in enumerate(reader, start=1):
            if not row:
                continue  # tolerate blank lines
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {row_number}: expected "
                    f"{len(header)} fields, got {len(row)}"
                )
            values = []
            for token in row:
                try:
                    value = float(token)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_number}: "
                        f"cannot parse {token.strip()!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ParseError(
                        f"{path}: row {row_number}: "
                        f"non-finite value {token.strip()!r}"
                    )
                values.append(value)
            label = values.pop(label_index)
            if label not in (0.0, 1.0):
                raise NonBinaryLabel(
                    f"{path}: row {row_number}: label {label!r} is not 0 or 1"
                )
            labels.append(int(label))
            feature_rows.append(values)
    if not feature_rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(np.array(feature_rows), np.array(labels), names=names)


def save_csv(ds, path):
    """Write a dataset as CSV with the label in a final ``label`` column.

    Floats are printed with 17 significant digits so a load of the file
    reproduces every value bit for bit.
    """
    names = ds.names or tuple(f"f{i}" for i in range(ds.n_features))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + ",label\n")
        for row, label in zip(ds.features, ds.labels):
            cells = [format(v, ".17g") for v in row]
            fh.write(",".join(cells) + f",{int(label)}\n")


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


def fit_pca(ds, k):
    """Eigendecompose the sample covariance and keep the top-k axes.

    Components come out sorted by descending eigenvalue with a
    deterministic sign convention (the largest-magnitude coordinate of
    each component is positive).  If the data has rank below ``k`` a
    :class:`RankDeficient` warning is emitted; zero eigenvalues are
    otherwise allowed.
    """
    m, d = ds.features.shape
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= min(m, d):
        raise OrthoNNError(
            f"k must lie in [1, min(m, d)] = [1, {min(m, d)}], got {k}"
        )
    mean = ds.features.mean(axis=0)
    centered = ds.features - mean
    cov = centered.T @ centered / (m - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.maximum(eigenvalues[order], 0.0)
    components = eigenvectors[:, order].T.copy()
    for row in components:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0.0:
            row *= -1.0
    tolerance = eigenvalues[0] * max(m, d) * np.finfo(np.float64).eps
    rank = int(np.sum(eigenvalues > tolerance))
    if rank < k:
        warnings.warn(
            f"PCA input has numerical rank {rank} but {k} components "
            "were requested; trailing explained variances are zero",
            RankDeficient,
            stacklevel=2,
        )
    return PcaModel(mean, components[:k], eigenvalues[:k])


def transform(model, ds):
    """Project a dataset onto a fitted PCA basis."""
    if ds.n_features != model.mean.shape[0]:
        raise DimensionMismatch(
            f"model expects {model.mean.shape[0]} features, "
            f"dataset has {ds.n_features}"
        )
    projected = (ds.features - model.mean) @ model.components.T
    names = tuple(f"pc{i + 1}" for i in range(model.k))
    return Dataset(projected, ds.labels, names=names)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def evaluate(predictions, labels):
    """Score binary predictions: accuracy, AUC, and a confusion matrix.

    ``predictions`` are scores in [0, 1]; the threshold for the hard
    decision is 0.5 with ties predicted positive.  AUC is the rank
    statistic with tied scores counted one half.  Raises
    :class:`SingleClass` when only one label value is present.
    """
    scores = np.asarray(predictions, dtype=np.float64).ravel()
    truth = np.asarray(labels).ravel()
    if scores.shape != truth.shape:
        raise DimensionMismatch("predictions and labels differ in length")
    if not np.all(np.isfinite(scores)):
        raise OrthoNNError("predictions contain NaN or Inf")
    if scores.size == 0:
        raise DimensionTooSmall("cannot evaluate zero predictions")
    if scores.min() < 0.0 or scores.max() > 1.0:
        raise OrthoNNError("prediction scores must lie in [0, 1]")
    if not np.all(np.isin(truth, (0, 1))):
        raise NonBinaryLabel("labels must all be 0 or 1")
    truth = truth.astype(np.int64)

    predicted = scores >= 0.5
    positive = truth == 1
    tp = int(np.sum(predicted & positive))
    tn = int(np.sum(~predicted & ~positive))
    fp = int(np.sum(predicted & ~positive))
    fn = int(np.sum(~predicted & positive))
    acc = float((tp + tn) / truth.size)

    n_pos = int(positive.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes present")

    # Mann-Whitney form with average ranks for tied scores.
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(truth.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < truth.size:
        j = i
        while j < truth.size and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j + 1)  # average of 1-based ranks
        i = j
    rank_sum = float(ranks[positive].sum())
    auc = (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    return {
        "acc": acc,
        "auc": float(auc),
        "confusion": {"tn": tn, "fp": fp, "fn": fn, "tp": tp},
    }


def metrics_to_csv(metrics):
    """One header row plus one data row, confusion flattened in
    ``tn,fp,fn,tp`` order."""
    c = metrics["confusion"]
    return (
        "acc,auc,tn,fp,fn,tp\n"
        f"{metrics['acc']!r},{metrics['auc']!r},"
        f"{c['tn']},{c['fp']},{c['fn']},{c['tp']}\n"
    )


# ---------------------------------------------------------------------------
# normalization, splitting, balancing
# ---------------------------------------------------------------------------


def normalize_rows(features):
    """Scale each row to unit L2 norm, returning (rows, norms).

    Zero rows are left as zeros with a recorded norm of 0 so the caller
    can decide how to treat them; the original matrix is untouched.
    """
    feats = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(feats, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    return feats / safe[:, None], norms


def _per_class_indices(ds, rng):
    for label_value in (0, 1):
        idx = np.flatnonzero(ds.labels == label_value)
        yield rng.permutation(idx)


def split_dataset(ds, test_fraction, seed):
    """Deterministic stratified split into (train, test) datasets."""
    if not 0.0 < test_fraction < 1.0:
        raise OrthoNNError(
            f"test_fraction must lie strictly in (0, 1), got {test_fraction}"
        )
    rng = np.random.default_rng(seed)
    train_idx = []
    test_idx = []
    for shuffled in _per_class_indices(ds, rng):
        n_test = int(round(test_fraction * shuffled.size))
        test_idx.append(shuffled[:n_test])
        train_idx.append(shuffled[n_test:])
    train_idx = rng.permutation(np.concatenate(train_idx))
    test_idx = rng.permutation(np.concatenate(test_idx))
    train = Dataset(
        ds.features[train_idx], ds.labels[train_idx], names=ds.names
    )
    test = Dataset(ds.features[test_idx], ds.labels[test_idx], names=ds.names)
    return train, test


def balance_dataset(ds, seed):
    """Undersample the majority class down to the minority count."""
    rng = np.random.default_rng(seed)
    per_class = list(_per_class_indices(ds, rng))
    n_keep = min(idx.size for idx in per_class)
    if n_keep == 0:
        raise SingleClass("cannot balance a dataset with one class")
    kept = rng.permutation(
        np.concatenate([idx[:n_keep] for idx in per_class])
    )
    return Dataset(ds.features[kept], ds.labels[kept], names=ds.names)


def toy_dataset_path():
    """Filesystem path of the bundled 500-sample 4-feature toy dataset."""
    return str(resources.files("orthonn") / "_assets" / "toy_pca4.csv")
