"""Categorical datasets, streams and evaluation splits.

Attributes are indexed from 0 everywhere: the first attribute of a dataset
is attribute 0.
"""
from __future__ import annotations

import csv
import itertools
import os
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AttributeSchema:
    """Names and cardinalities of the attributes plus the number of classes."""

    names: tuple
    cardinalities: tuple
    num_classes: int
    category_labels: tuple = field(default=None, compare=False)
    class_labels: tuple = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        if len(self.names) != len(self.cardinalities):
            raise ValueError("names and cardinalities differ in length")
        if any(c < 1 for c in self.cardinalities):
            raise ValueError("attribute cardinalities must be >= 1")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")

    @classmethod
    def uniform(cls, q, cardinality=2, num_classes=2):
        return cls(tuple(f"X{i}" for i in range(q)), (cardinality,) * q, num_classes)

    @property
    def q(self):
        return len(self.cardinalities)

    @property
    def max_cardinality(self):
        return max(self.cardinalities) if self.cardinalities else 1

    def splittable(self, attribute):
        return self.cardinalities[attribute] >= 2

    def validate(self, values, label):
        if len(values) != self.q:
            raise ValueError(f"expected {self.q} values, got {len(values)}")
        for i, (v, c) in enumerate(zip(values, self.cardinalities)):
            if not 0 <= v < c:
                raise ValueError(f"value {v} out of range for attribute {i} (cardinality {c})")
        if not 0 <= label < self.num_classes:
            raise ValueError(f"label {label} out of range [0, {self.num_classes})")


class Instance:
    """A categorical feature vector with its class label."""

    __slots__ = ("values", "label")

    def __init__(self, values, label):
        self.values = np.asarray(values, dtype=np.int64)
        self.label = int(label)

    def __eq__(self, other):
        return (isinstance(other, Instance) and self.label == other.label
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((tuple(self.values.tolist()), self.label))

    def __repr__(self):
        return f"Instance({self.values.tolist()}, {self.label})"


class Dataset:
    """Rows stored column-wise as an integer matrix ``X`` and label vector ``y``."""

    def __init__(self, schema, X, y):
        X = np.asarray(X, dtype=np.int64).reshape(-1, schema.q)
        y = np.asarray(y, dtype=np.int64).reshape(-1)
        if len(X) != len(y):
            raise ValueError("X and y differ in length")
        card = np.asarray(schema.cardinalities, dtype=np.int64)
        if len(X) and ((X < 0).any() or (X >= card).any()):
            raise ValueError("attribute value outside schema")
        if len(y) and ((y < 0).any() or (y >= schema.num_classes).any()):
            raise ValueError("label outside schema")
        self.schema = schema
        self.X = X
        self.y = y

    @classmethod
    def from_rows(cls, schema, rows):
        rows = list(rows)
        X = np.array([r.values for r in rows], dtype=np.int64).reshape(-1, schema.q)
        y = np.array([r.label for r in rows], dtype=np.int64)
        return cls(schema, X, y)

    def __len__(self):
        return len(self.y)

    def __getitem__(self, i):
        return Instance(self.X[i], self.y[i])

    @property
    def rows(self):
        return [self[i] for i in range(len(self))]

    def subset(self, idx):
        return Dataset(self.schema, self.X[idx], self.y[idx])


def parse_csv(path, label_column=-1, explicit_schema=None):
    """Read a header-first CSV of categorical cells into a :class:`Dataset`.

    Categories of each column are the distinct strings sorted
    lexicographically, mapped to 0-based indices. With ``explicit_schema``
    the cells must already be integer indices valid for that schema.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        table = [[c.strip() for c in row] for row in reader if row]
    if not table:
        raise ValueError(f"{path}: no data rows")

    if isinstance(label_column, str):
        if label_column not in header:
            raise KeyError(f"unknown label column {label_column!r}")
        label_idx = header.index(label_column)
    else:
        if not -len(header) <= label_column < len(header):
            raise KeyError(f"label column index {label_column} out of range")
        label_idx = label_column % len(header)

    for r, row in enumerate(table):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
        if any(c == "" for c in row):
            raise ValueError(f"{path}: row {r + 2} has an empty cell")

    feature_cols = [i for i in range(len(header)) if i != label_idx]
    columns = list(zip(*table))

    if explicit_schema is not None:
        if explicit_schema.q != len(feature_cols):
            raise ValueError("explicit schema does not match the number of feature columns")
        try:
            X = np.array([[int(columns[i][r]) for i in feature_cols] for r in range(len(table))])
            y = np.array([int(v) for v in columns[label_idx]])
        except ValueError as exc:
            raise ValueError(f"non-integer cell under explicit schema: {exc}") from None
        return Dataset(explicit_schema, X, y)

    cats = [sorted(set(columns[i])) for i in feature_cols]
    classes = sorted(set(columns[label_idx]))
    if len(classes) < 2:
        classes.append("<absent>")
    schema = AttributeSchema(
        names=[header[i] for i in feature_cols],
        cardinalities=[len(c) for c in cats],
        num_classes=len(classes),
        category_labels=tuple(tuple(c) for c in cats),
        class_labels=tuple(classes),
    )
    lookup = [{v: j for j, v in enumerate(c)} for c in cats]
    X = np.empty((len(table), len(feature_cols)), dtype=np.int64)
    for a, col in enumerate(feature_cols):
        X[:, a] = [lookup[a][v] for v in columns[col]]
    class_lookup = {v: k for k, v in enumerate(classes)}
    y = np.array([class_lookup[v] for v in columns[label_idx]], dtype=np.int64)
    return Dataset(schema, X, y)


def write_csv(dataset, path, label_name="class"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(dataset.schema.names) + [label_name])
        for x, label in zip(dataset.X.tolist(), dataset.y.tolist()):
            w.writerow(x + [label])


ENCODINGS = ("none", "drop_first", "drop_last")


def one_hot_encode(dataset, mode="none"):
    """Binary-encode every attribute with more than two categories.

    An attribute with ``c > 2`` categories becomes ``c - 1`` indicator
    attributes; the dropped category (first or last) is the all-zeros code.
    Binary and constant attributes pass through.
    """
    if mode not in ENCODINGS:
        raise ValueError(f"unknown encoding {mode!r}; expected one of {ENCODINGS}")
    if mode == "none":
        return dataset
    schema = dataset.schema
    names, cards, blocks = [], [], []
    for a, c in enumerate(schema.cardinalities):
        col = dataset.X[:, a]
        if c <= 2:
            names.append(schema.names[a])
            cards.append(c)
            blocks.append(col[:, None])
            continue
        kept = range(1, c) if mode == "drop_first" else range(c - 1)
        for v in kept:
            names.append(f"{schema.names[a]}={v}")
            cards.append(2)
        blocks.append(np.stack([(col == v).astype(np.int64) for v in kept], axis=1))
    out = AttributeSchema(names, cards, schema.num_classes, class_labels=schema.class_labels)
    X = np.concatenate(blocks, axis=1) if blocks else np.zeros((len(dataset), 0), dtype=np.int64)
    return Dataset(out, X, dataset.y.copy())


class StreamSource:
    """Infinite, seeded supplier of instances.

    Subclasses fill an internal buffer in blocks through ``_refill``; the
    emitted sequence is independent of whether it is consumed with
    ``next`` or ``take``. Not safe for concurrent consumers.
    """

    schema: AttributeSchema

    def __init__(self):
        self._X = np.empty((0, 0), dtype=np.int64)
        self._y = np.empty(0, dtype=np.int64)
        self._pos = 0
        self.pulled = 0

    def _refill(self):
        raise NotImplementedError

    def take(self, n):
        """Return the next ``n`` instances as ``(X, y)`` arrays."""
        xs, ys = [], []
        while n > 0:
            if self._pos >= len(self._y):
                self._X, self._y = self._refill()
                self._pos = 0
            k = min(n, len(self._y) - self._pos)
            xs.append(self._X[self._pos:self._pos + k])
            ys.append(self._y[self._pos:self._pos + k])
            self._pos += k
            self.pulled += k
            n -= k
        if not xs:
            return np.empty((0, self.schema.q), dtype=np.int64), np.empty(0, dtype=np.int64)
        return np.concatenate(xs), np.concatenate(ys)

    def next(self):
        X, y = self.take(1)
        return Instance(X[0], y[0])

    __next__ = next

    def __iter__(self):
        return self


class XorStream(StreamSource):
    """Uniform binary attributes; label 1 iff attributes 0 and 1 agree."""

    block = 1024

    def __init__(self, q, seed=0):
        if q < 2:
            raise ValueError("xor stream needs q >= 2")
        super().__init__()
        self.q = q
        self.schema = AttributeSchema.uniform(q)
        self.rng = np.random.default_rng(seed)

    def _refill(self):
        X = self.rng.integers(0, 2, size=(self.block, self.q), dtype=np.int64)
        return X, (X[:, 0] == X[:, 1]).astype(np.int64)


def xor_stream(q, seed=0):
    return XorStream(q, seed)


class ReplayStream(StreamSource):
    """Cycles through a dataset, one seeded permutation per epoch."""

    def __init__(self, dataset, seed=0, reshuffle=True):
        if len(dataset) == 0:
            raise ValueError("cannot replay an empty dataset")
        super().__init__()
        self.dataset = dataset
        self.schema = dataset.schema
        self.reshuffle = reshuffle
        self.rng = np.random.default_rng(seed)
        self._perm = None
        self.epoch = 0

    def _refill(self):
        if self._perm is None or self.reshuffle:
            self._perm = self.rng.permutation(len(self.dataset))
        self.epoch += 1
        return self.dataset.X[self._perm], self.dataset.y[self._perm]


def replay_stream(dataset, seed=0, reshuffle=True):
    return ReplayStream(dataset, seed, reshuffle)


def kfold(dataset, k, seed=0):
    """Seeded shuffle, then contiguous folds whose sizes differ by at most one."""
    n = len(dataset)
    if not 2 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    sizes = [n // k + (1 if f < n % k else 0) for f in range(k)]
    bounds = np.cumsum([0] + sizes)
    folds = []
    for f in range(k):
        test_idx = perm[bounds[f]:bounds[f + 1]]
        train_idx = np.concatenate([perm[:bounds[f]], perm[bounds[f + 1]:]])
        folds.append((dataset.subset(train_idx), dataset.subset(test_idx)))
    return folds


# MONK's problem 1: six attributes with values 1..3, 1..3, 1..2, 1..3, 1..4, 1..2
# (stored 0-based); class 1 iff a1 == a2 or a5 == 1.
MONK_CARDINALITIES = (3, 3, 2, 3, 4, 2)


def monk1_full():
    """All 432 points of the MONK1 domain, labelled by the target concept."""
    schema = AttributeSchema([f"a{i + 1}" for i in range(6)], MONK_CARDINALITIES, 2)
    X = np.array(list(itertools.product(*[range(c) for c in MONK_CARDINALITIES])), dtype=np.int64)
    y = ((X[:, 0] == X[:, 1]) | (X[:, 4] == 0)).astype(np.int64)
    return Dataset(schema, X, y)


def monk1_sample(n=124, seed=0):
    """A seeded ``n``-row sample of the MONK1 domain covering every category."""
    full = monk1_full()
    rng = np.random.default_rng(seed)
    while True:
        idx = np.sort(rng.choice(len(full), size=n, replace=False))
        sub = full.subset(idx)
        if all(len(np.unique(sub.X[:, a])) == c for a, c in enumerate(MONK_CARDINALITIES)):
            return sub


def evaluate(tree, dataset, lam=0.0):
    """Accuracy, size and regularised score of ``tree`` on ``dataset``.

    Leaves that saw no training data predict the majority class of the
    root region, i.e. of every training sample seen so far.
    """
    from .dtree import predict

    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    accuracy = float((predict(tree, dataset.X) == dataset.y).mean())
    return {
        "accuracy": accuracy,
        "leaves": len(tree.leaves),
        "splits": tree.splits,
        "score": accuracy - lam * tree.splits,
    }
