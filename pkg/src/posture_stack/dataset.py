"""Physiological feature dataset: CSV ingestion, splitting, scaling,
correlation analysis and a seeded synthetic generator.

Rows hold four per-sample features (EGG scalar, heart rate, respiration
rate, SpO2) and a resting-position label encoded as right=0, supine=1,
left=2.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, FitError, LabelError, ParseError, SchemaError

FEATURE_NAMES = ("egg", "heart_rate", "respiration_rate", "spo2")
FEATURE_UNITS = ("dimensionless", "beats/min", "breaths/min", "percent")
CLASS_NAMES = ("right", "supine", "left")
LABEL_COLUMN = "position"


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple = FEATURE_NAMES
    units: tuple = FEATURE_UNITS
    class_names: tuple = CLASS_NAMES

    def __post_init__(self):
        if len(self.names) != 4 or len(set(self.names)) != 4:
            raise SchemaError(f"expected 4 unique feature names, got {self.names!r}")
        if len(self.units) != len(self.names):
            raise SchemaError("one unit string is required per feature")
        if len(self.class_names) != 3 or len(set(self.class_names)) != 3:
            raise SchemaError(f"expected 3 unique class names, got {self.class_names!r}")

    @property
    def n_features(self):
        return len(self.names)

    @property
    def n_classes(self):
        return len(self.class_names)

    def header(self):
        return list(self.names) + [LABEL_COLUMN]

    def to_dict(self):
        return {"names": list(self.names), "units": list(self.units),
                "class_names": list(self.class_names)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["names"]), tuple(d["units"]), tuple(d["class_names"]))


DEFAULT_SCHEMA = FeatureSchema()


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Validated, immutable feature matrix with integer class labels."""

    schema: FeatureSchema
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = _frozen(self.features, np.float64)
        y = _frozen(self.labels, np.int64)
        if X.size == 0:
            X = _frozen(np.zeros((0, self.schema.n_features)), np.float64)
        if X.ndim != 2 or X.shape[1] != self.schema.n_features:
            raise SchemaError(f"features must be n x {self.schema.n_features}, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise SchemaError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise SchemaError("features contain non-finite values")
        if y.size and (y.min() < 0 or y.max() >= self.schema.n_classes):
            raise LabelError(f"labels must lie in [0, {self.schema.n_classes})")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return int(self.labels.shape[0])

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.schema, self.features[indices], self.labels[indices])

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.schema.n_classes)

    def to_csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.schema.header())
        for row, label in zip(self.features, self.labels):
            writer.writerow([repr(float(v)) for v in row] + [self.schema.class_names[label]])
        return buf.getvalue()

    def fingerprint(self):
        return hashlib.sha256(self.to_csv_text().encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_label(token, schema, row):
    token = token.strip()
    if token in schema.class_names:
        return schema.class_names.index(token)
    try:
        code = int(token)
    except ValueError:
        raise LabelError(f"row {row}: unknown position label {token!r}") from None
    if not 0 <= code < schema.n_classes:
        raise LabelError(f"row {row}: position code {code} outside 0..{schema.n_classes - 1}")
    return code


def parse_csv(text, schema=DEFAULT_SCHEMA):
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("CSV is empty; a header row is required") from None
    expected = schema.header()
    if header != expected:
        missing = [c for c in expected if c not in header]
        extra = [c for c in header if c not in expected]
        raise SchemaError(
            f"header {header} does not match {expected} (missing={missing}, extra={extra})")

    rows, labels = [], []
    for i, record in enumerate(reader, start=1):
        if not record or all(not f.strip() for f in record):
            continue
        if len(record) != len(expected):
            raise SchemaError(f"row {i}: expected {len(expected)} fields, got {len(record)}")
        values = []
        for name, token in zip(schema.names, record):
            try:
                v = float(token)
            except ValueError:
                raise ParseError(i, name, f"non-numeric value {token!r}") from None
            if not math.isfinite(v):
                raise ParseError(i, name, f"non-finite value {token!r}")
            values.append(v)
        rows.append(values)
        labels.append(_parse_label(record[-1], schema, i))
    return Dataset(schema, np.array(rows, dtype=np.float64).reshape(-1, schema.n_features),
                   np.array(labels, dtype=np.int64))


def load_csv(path, schema=DEFAULT_SCHEMA):
    """Read a dataset CSV. Labels may be class names or integer codes."""
    return parse_csv(Path(path).read_text(encoding="utf-8"), schema)


# ---------------------------------------------------------------------------
# Splitting


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def split_indices(labels, test_fraction, seed, stratified=True):
    """Return sorted ``(train_idx, test_idx)`` index arrays."""
    if not 0.0 <= test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    labels = np.asarray(labels)
    n = labels.shape[0]
    if test_fraction == 0.0:
        return np.arange(n), np.arange(0)
    if n == 0:
        raise ConfigError("cannot split an empty dataset")

    rng = np.random.default_rng(seed)
    test = []
    if stratified:
        for c in np.unique(labels):
            members = np.flatnonzero(labels == c)
            take = _round_half_up(members.size * test_fraction)
            test.append(rng.permutation(members)[:take])
    else:
        test.append(rng.permutation(n)[:_round_half_up(n * test_fraction)])
    test_idx = np.sort(np.concatenate(test)).astype(np.int64)
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx


def split(data, test_fraction=0.2, seed=42, stratified=True):
    train_idx, test_idx = split_indices(data.labels, test_fraction, seed, stratified)
    return data.subset(train_idx), data.subset(test_idx)


# ---------------------------------------------------------------------------
# Scaling


@dataclass(frozen=True)
class ScalerParams:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(self.means, np.float64))
        object.__setattr__(self, "stds", _frozen(self.stds, np.float64))
        if self.means.shape != self.stds.shape or self.means.ndim != 1:
            raise SchemaError("scaler means and stds must be vectors of equal length")
        if np.any(self.stds < 0):
            raise SchemaError("scaler stds must be non-negative")

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.means.shape[0]:
            raise SchemaError(f"expected {self.means.shape[0]} features, got {X.shape[-1]}")
        safe = np.where(self.stds > 0, self.stds, 1.0)
        return np.where(self.stds > 0, (X - self.means) / safe, 0.0)

    def to_dict(self):
        return {"means": [float(v) for v in self.means], "stds": [float(v) for v in self.stds]}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["means"], dtype=np.float64), np.array(d["stds"], dtype=np.float64))


def fit_scaler(train):
    """Per-column mean and population standard deviation over ``train``."""
    if len(train) == 0:
        raise FitError("cannot fit a scaler on an empty dataset")
    X = train.features
    return ScalerParams(X.mean(axis=0), X.std(axis=0))


def apply_scaler(params, data):
    if params.means.shape[0] != data.schema.n_features:
        raise SchemaError("scaler arity does not match dataset schema")
    return replace(data, features=params.transform(data.features))


# ---------------------------------------------------------------------------
# Correlation


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple
    values: np.ndarray

    def to_dict(self):
        return {"labels": list(self.labels),
                "values": [[float(v) for v in row] for row in self.values]}

    def to_table(self, digits=3):
        width = max(len(s) for s in self.labels) + 2
        lines = [" " * width + "".join(s.rjust(width) for s in self.labels)]
        for name, row in zip(self.labels, self.values):
            lines.append(name.ljust(width) + "".join(f"{v:{width}.{digits}f}" for v in row))
        return "\n".join(lines) + "\n"


def pearson(x, y):
    """Pearson correlation; 0 when either variable has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def correlation_matrix(data):
    if len(data) < 2:
        raise ConfigError("correlation needs at least 2 rows")
    cols = np.column_stack([data.features, data.labels.astype(np.float64)])
    names = tuple(data.schema.names) + (LABEL_COLUMN,)
    k = cols.shape[1]
    values = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            values[i, j] = values[j, i] = pearson(cols[:, i], cols[:, j])
    values.setflags(write=False)
    return CorrelationMatrix(names, values)


# ---------------------------------------------------------------------------
# Synthetic stand-in data


@dataclass(frozen=True)
class SynthParams:
    """Class-conditional Gaussian generator settings.

    ``means`` and ``stds`` are (3 classes x 4 features); ``clamps`` is
    (4 features x [low, high]).
    """

    means: tuple
    stds: tuple
    clamps: tuple = ((0.5, 6.0), (40.0, 140.0), (6.0, 40.0), (85.0, 100.0))
    seed: int = 42

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        clamps = np.asarray(self.clamps, dtype=np.float64)
        if means.shape != (3, 4) or stds.shape != (3, 4):
            raise ConfigError("means and stds must be 3 x 4")
        if clamps.shape != (4, 2):
            raise ConfigError("clamps must be 4 x 2")
        if np.any(stds <= 0):
            raise ConfigError("synthesis stds must be positive")
        if np.any(clamps[:, 0] >= clamps[:, 1]):
            raise ConfigError("every clamp needs lower < upper")
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative")

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def to_dict(self):
        return {"means": [list(r) for r in self.means], "stds": [list(r) for r in self.stds],
                "clamps": [list(r) for r in self.clamps], "seed": self.seed}

    @classmethod
    def from_dict(cls, d, base=None):
        base = base or separated_params()
        return cls(
            means=_as_nested_tuple(d.get("means", base.means)),
            stds=_as_nested_tuple(d.get("stds", base.stds)),
            clamps=_as_nested_tuple(d.get("clamps", base.clamps)),
            seed=int(d.get("seed", base.seed)),
        )


def _as_nested_tuple(rows):
    return tuple(tuple(float(v) for v in r) for r in rows)


# Class order right, supine, left. EGG rises and SpO2 / respiration fall
# with the position code; heart rate peaks at supine so its linear
# correlation with the code stays near zero.
_MEANS = (
    (2.0, 72.0, 17.5, 98.0),
    (3.0, 73.5, 16.5, 97.0),
    (4.0, 72.0, 15.5, 96.0),
)
_SEPARATED_STDS = ((0.15, 4.0, 1.2, 0.6),) * 3
_NOISY_STDS = ((0.9, 6.0, 2.5, 1.5),) * 3


def separated_params(seed=42):
    """Well-separated preset: the tree learners can classify it almost perfectly."""
    return SynthParams(_MEANS, _SEPARATED_STDS, seed=seed)


def noisy_params(seed=42):
    """Heavily overlapping preset used to expose in-sample stacking leakage."""
    return SynthParams(_MEANS, _NOISY_STDS, seed=seed)


PRESETS = {"separated": separated_params, "noisy": noisy_params}


def generate(params, n, schema=DEFAULT_SCHEMA):
    """Draw ``n / 3`` rows per class, clamp to physiological ranges, shuffle."""
    if n < 0 or n % 3 != 0:
        raise ConfigError(f"n must be a non-negative multiple of 3, got {n}")
    rng = np.random.default_rng(params.seed)
    means = np.asarray(params.means)
    stds = np.asarray(params.stds)
    clamps = np.asarray(params.clamps)
    per_class = n // 3
    blocks, labels = [], []
    for c in range(3):
        blocks.append(rng.normal(means[c], stds[c], size=(per_class, 4)))
        labels.append(np.full(per_class, c, dtype=np.int64))
    X = np.clip(np.vstack(blocks), clamps[:, 0], clamps[:, 1])
    y = np.concatenate(labels)
    order = rng.permutation(n)
    return Dataset(schema, X[order], y[order])
