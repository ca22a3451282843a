"""Dataset loading, normalization and stream construction."""
import csv
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .rng import SplitMix64

__all__ = [
    "Sample", "Dataset", "SplitSpec", "NormParams", "DatasetError",
    "load_csv", "load_bundled", "bundled_names", "zscore_fit_apply",
    "unit_ball_rescale", "normalize", "make_stream", "samples_from_arrays",
]


class DatasetError(ValueError):
    """Malformed or unusable input data."""


@dataclass(frozen=True, eq=False)
class Sample:
    features: np.ndarray
    label: int
    stream_index: int = 0

    @property
    def dim(self):
        return self.features.shape[0]


@dataclass(eq=False)
class Dataset:
    """Labeled feature table; iteration yields :class:`Sample` in row order."""

    features: np.ndarray
    labels: np.ndarray
    name: str = ""
    classes: tuple = ()

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DatasetError("features must be a 2-d array")
        if self.labels.shape != (self.features.shape[0],):
            raise DatasetError("one label per row required")
        if not self.classes:
            n = int(self.labels.max()) + 1 if self.labels.size else 0
            self.classes = tuple(str(k) for k in range(n))

    def __len__(self):
        return self.features.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i):
        return Sample(self.features[i], int(self.labels[i]), i)

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def num_classes(self):
        return len(self.classes)

    def subset(self, index):
        index = np.asarray(index, dtype=np.intp)
        return Dataset(self.features[index], self.labels[index], self.name, self.classes)

    def with_features(self, features):
        return Dataset(features, self.labels, self.name, self.classes)

    def max_norm(self):
        if len(self) == 0:
            return 0.0
        return float(np.sqrt((self.features ** 2).sum(axis=1)).max())


def samples_from_arrays(X, y):
    """List of samples from a feature matrix and label vector."""
    X = np.asarray(X, dtype=np.float64)
    return [Sample(X[i], int(y[i]), i) for i in range(X.shape[0])]


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_csv(path, label_column=-1, name=None):
    """Read a comma-separated table with one label column.

    A first row whose feature cells are not all numeric is taken as a header.
    Labels are arbitrary tokens, remapped to ``0..c-1`` in order of first
    appearance; the original tokens are kept in ``Dataset.classes``.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DatasetError(f"{path}: cannot read ({exc})") from exc
    if not rows:
        raise DatasetError(f"{path}: empty dataset")

    width = len(rows[0])
    if width < 2:
        raise DatasetError(f"{path}: need at least one feature and a label column")
    lab = label_column % width if -width <= label_column < width else None
    if lab is None:
        raise DatasetError(f"{path}: label column {label_column} out of range for {width} columns")

    start = 0
    if not all(_is_number(c) for j, c in enumerate(rows[0]) if j != lab):
        start = 1
    body = rows[start:]
    if not body:
        raise DatasetError(f"{path}: empty dataset")

    X = np.empty((len(body), width - 1))
    tokens = []
    for i, row in enumerate(body, start=start + 1):
        if len(row) != width:
            raise DatasetError(f"{path}: row {i} has {len(row)} columns, expected {width}")
        k = 0
        for j, cell in enumerate(row):
            if j == lab:
                tokens.append(cell.strip())
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DatasetError(f"{path}: row {i}, column {j + 1}: non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise DatasetError(f"{path}: row {i}, column {j + 1}: non-finite value {cell!r}")
            X[i - start - 1, k] = v
            k += 1

    classes = list(dict.fromkeys(tokens))
    lookup = {tok: k for k, tok in enumerate(classes)}
    y = np.array([lookup[t] for t in tokens], dtype=np.int64)
    return Dataset(X, y, name or path.stem, tuple(classes))


def bundled_names():
    files = resources.files("opml") / "datasets"
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".csv"))


def load_bundled(name):
    """Load one of the UCI tables shipped with the package (label last)."""
    ref = resources.files("opml") / "datasets" / f"{name}.csv"
    if not ref.is_file():
        raise DatasetError(f"no bundled dataset {name!r}; have {bundled_names()}")
    with resources.as_file(ref) as p:
        return load_csv(p, label_column=-1, name=name)


@dataclass
class NormParams:
    means: np.ndarray
    stds: np.ndarray
    scale: float = 1.0
    ddof: int = 0
    test_max_norm: float = float("nan")

    def to_json(self):
        return json.dumps({
            "means": [float(v) for v in self.means],
            "stds": [float(v) for v in self.stds],
            "scale": float(self.scale),
            "ddof": self.ddof,
            "test_max_norm": float(self.test_max_norm),
        }, indent=2)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(np.array(d["means"]), np.array(d["stds"]), d["scale"], d["ddof"],
                   d.get("test_max_norm", float("nan")))

    def apply(self, X):
        X = np.asarray(X, dtype=np.float64)
        safe = np.where(self.stds > 0, self.stds, 1.0)
        Z = np.where(self.stds > 0, (X - self.means) / safe, 0.0)
        return Z / self.scale


def zscore_fit_apply(train, test, ddof=0):
    """Standardize every feature with train statistics; constant features map to 0."""
    if len(train) == 0:
        raise DatasetError("cannot fit normalization on an empty train set")
    means = train.features.mean(axis=0)
    stds = train.features.std(axis=0, ddof=ddof)
    # a constant column can leave round-off in std
    spread = np.abs(train.features - means).max(axis=0)
    stds = np.where(spread <= 1e-12 * np.maximum(1.0, np.abs(means)), 0.0, stds)
    params = NormParams(means, stds, 1.0, ddof)
    return (train.with_features(params.apply(train.features)),
            test.with_features(params.apply(test.features)), params)


def unit_ball_rescale(train, test):
    """Divide both sets by the largest train-sample norm so train norms are <= 1."""
    scale = train.max_norm()
    if not scale > 0:
        raise DatasetError("all-zero train set cannot be rescaled to the unit ball")
    return (train.with_features(train.features / scale),
            test.with_features(test.features / scale), scale)


def normalize(train, test, ddof=0):
    """Z-score then unit-ball rescale, fitted on ``train`` only."""
    ztr, zte, params = zscore_fit_apply(train, test, ddof=ddof)
    ntr, nte, scale = unit_ball_rescale(ztr, zte)
    return ntr, nte, replace(params, scale=scale, test_max_norm=nte.max_norm())


@dataclass(frozen=True)
class SplitSpec:
    """How a dataset becomes a (train stream, test set) pair.

    ``mode="shuffled"`` permutes all rows uniformly. ``mode="coldstart"`` cuts
    each class (after a within-class shuffle) into ``parts`` contiguous blocks
    and deals them out class by class, so the stream opens with a run of a
    single class.
    """

    train_fraction: float = 0.5
    seed: int = 0
    mode: str = "shuffled"
    parts: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.mode not in ("shuffled", "coldstart"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if self.mode == "coldstart" and self.parts < 1:
            raise ValueError("coldstart mode needs parts >= 1")

    def to_dict(self):
        return {"train_fraction": self.train_fraction, "seed": self.seed,
                "mode": self.mode, "parts": self.parts}


def coldstart_order(labels, parts, rng=None):
    """Row order that interleaves per-class blocks: c0b0, c1b0, ..., c0b1, ..."""
    labels = np.asarray(labels)
    blocks = []
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        if rng is not None:
            idx = idx[rng.permutation(len(idx))]
        blocks.append(np.array_split(idx, parts))
    order = [b[p] for p in range(parts) for b in blocks]
    return np.concatenate(order) if order else np.empty(0, dtype=np.intp)


def make_stream(ds, spec):
    """Split ``ds`` into a train stream and a test set, both as datasets."""
    n = len(ds)
    rng = SplitMix64(spec.seed)
    if spec.mode == "shuffled":
        order = np.array(rng.permutation(n), dtype=np.intp)
    else:
        order = coldstart_order(ds.labels, spec.parts, rng)
    n_train = int(math.floor(n * spec.train_fraction + 0.5))
    if n_train == 0 or n_train == n:
        raise DatasetError(
            f"train_fraction {spec.train_fraction} leaves an empty train or test set for {n} samples")
    return ds.subset(order[:n_train]), ds.subset(order[n_train:])
