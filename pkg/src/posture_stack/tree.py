"""CART classification tree grown by greedy Gini split search."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _serial
from .errors import ConfigError, DomainError, FitError, ModelLoadError, PredictError

# Gains closer than this are treated as ties (lowest feature, then lowest
# threshold wins). Well above float noise, far below any real gain gap.
GAIN_TIE_EPS = 1e-12
LEAF = -1


@dataclass(frozen=True)
class TreeConfig:
    max_depth: Optional[int] = 6
    min_samples_split: int = 2
    min_gain: float = 0.0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0 (or None for unlimited)")
        if self.min_samples_split < 2:
            raise ConfigError("min_samples_split must be >= 2")
        if self.min_gain < 0:
            raise ConfigError("min_gain must be >= 0")

    def to_dict(self):
        return {"max_depth": self.max_depth, "min_samples_split": self.min_samples_split,
                "min_gain": self.min_gain}

    @classmethod
    def from_dict(cls, d):
        return cls(d["max_depth"], d["min_samples_split"], d["min_gain"])


class Split(NamedTuple):
    feature_index: int
    threshold: float
    gain: float


@dataclass(frozen=True)
class DecisionTree:
    """Node arrays. Split nodes have ``feature >= 0``; leaves have
    ``feature == -1`` and a row of ``class_counts``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    class_counts: np.ndarray

    @property
    def n_nodes(self):
        return int(self.feature.shape[0])

    @property
    def n_classes(self):
        return int(self.class_counts.shape[1])

    @property
    def leaf_classes(self):
        return np.argmax(self.class_counts, axis=1)

    def to_dict(self):
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] == LEAF:
                nodes.append({"kind": "leaf",
                              "class_counts": [int(c) for c in self.class_counts[i]]})
            else:
                nodes.append({"kind": "split", "feature_index": int(self.feature[i]),
                              "threshold": float(self.threshold[i]),
                              "left": int(self.left[i]), "right": int(self.right[i])})
        return {"n_classes": self.n_classes, "nodes": nodes}

    @classmethod
    def from_dict(cls, d, path="tree"):
        k = _serial.field(d, "n_classes", path, int)
        if k < 1:
            raise ModelLoadError(f"{path}.n_classes", "must be >= 1")
        nodes = _serial.field(d, "nodes", path, list)
        arrays = _decode_nodes(nodes, f"{path}.nodes", _leaf_counts_decoder(k))
        counts = np.zeros((len(nodes), k), dtype=np.int64)
        for i, payload in arrays.pop("payload").items():
            counts[i] = payload
        return cls(class_counts=counts, **arrays)


def _leaf_counts_decoder(k):
    def decode(node, path):
        counts = _serial.number_list(_serial.field(node, "class_counts", path),
                                     f"{path}.class_counts", length=k, integer=True)
        if min(counts) < 0 or sum(counts) < 1:
            raise ModelLoadError(f"{path}.class_counts", "counts must be >= 0 with sum >= 1")
        return counts
    return decode


def _decode_nodes(nodes, path, decode_leaf):
    """Shared structural validation for classification and regression trees."""
    n = len(nodes)
    if n == 0:
        raise ModelLoadError(path, "tree has no nodes")
    feature = np.full(n, LEAF, dtype=np.int64)
    threshold = np.zeros(n)
    left = np.full(n, LEAF, dtype=np.int64)
    right = np.full(n, LEAF, dtype=np.int64)
    payload = {}
    for i, node in enumerate(nodes):
        where = f"{path}[{i}]"
        kind = _serial.field(node, "kind", where, str)
        if kind == "leaf":
            payload[i] = decode_leaf(node, where)
        elif kind == "split":
            feature[i] = _serial.field(node, "feature_index", where, int)
            threshold[i] = _serial.field(node, "threshold", where, float)
            for name, arr in (("left", left), ("right", right)):
                child = _serial.field(node, name, where, int)
                # children always follow their parent, which rules out cycles
                if not i < child < n:
                    raise ModelLoadError(f"{where}.{name}", f"child index {child} invalid")
                arr[i] = child
            if feature[i] < 0:
                raise ModelLoadError(f"{where}.feature_index", "must be >= 0")
        else:
            raise ModelLoadError(f"{where}.kind", f"unknown node kind {kind!r}")
    return {"feature": feature, "threshold": threshold, "left": left, "right": right,
            "payload": payload}


def gini(class_counts):
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 1 or np.any(counts < 0):
        raise DomainError("class counts must be a non-negative vector")
    total = counts.sum()
    if total <= 0:
        raise DomainError("gini of an empty node is undefined")
    p = counts / total
    return float(1.0 - p @ p)


def midpoints(lo, hi):
    mid = lo + (hi - lo) / 2.0
    # adjacent floats: keep ``lo`` on the left under the strict < rule
    return np.where(mid > lo, mid, hi)


def sorted_columns(X):
    """Stable per-column sort order and the sorted values, plus a mask of
    positions where a threshold fits between consecutive distinct values."""
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    return order, xs, xs[1:] > xs[:-1]


def gini_gains(X, labels, n_classes):
    """Gini gain of cutting after each sorted position, per feature.

    Returns ``(xs, gains, valid)`` where ``gains[i, f]`` is the gain of the
    split between sorted rows ``i`` and ``i + 1`` of feature ``f``.
    """
    n = X.shape[0]
    order, xs, valid = sorted_columns(X)
    onehot = np.eye(n_classes)[labels[order]]  # (n, F, K)
    left = np.cumsum(onehot, axis=0)[:-1]
    total = onehot[:, 0, :].sum(axis=0)
    right = total - left
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    # parent gini - weighted child gini, rearranged so only exact integer
    # sums of squares get divided
    gains = ((left * left).sum(axis=2) / n_left + (right * right).sum(axis=2) / n_right
             - float(total @ total) / n) / n
    return xs, gains, valid


def pick_split(xs, gains, valid, min_gain):
    """Highest gain over valid cuts; near-ties go to the lowest feature,
    then the lowest threshold. None unless the best gain beats ``min_gain``."""
    if not valid.any():
        return None
    masked = np.where(valid, gains, -np.inf)
    best = masked.max()
    if not best > min_gain + GAIN_TIE_EPS:
        return None
    hits = masked >= best - GAIN_TIE_EPS
    f = int(np.flatnonzero(hits.any(axis=0))[0])
    i = int(np.flatnonzero(hits[:, f])[0])
    threshold = float(midpoints(xs[i, f], xs[i + 1, f]))
    return Split(f, threshold, float(gains[i, f]))


def best_split(features, labels, min_gain=0.0, n_classes=None):
    """Highest-gain (feature, midpoint) split, or None if no gain exceeds ``min_gain``."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] < 2:
        return None
    k = int(n_classes if n_classes is not None else y.max() + 1)
    return pick_split(*gini_gains(X, y, k), min_gain)


def fit_tree(features, labels, config=TreeConfig(), n_classes=None):
    """Grow a classification tree on a feature matrix and integer labels."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise FitError("cannot fit a tree on an empty training set")
    if y.shape[0] != X.shape[0]:
        raise FitError("features and labels differ in length")
    k = int(n_classes if n_classes is not None else y.max() + 1)

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node():
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append(np.zeros(k, dtype=np.int64))
        return len(feature) - 1

    stack = [(new_node(), np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        node_counts = np.bincount(y[rows], minlength=k)
        split = None
        if ((config.max_depth is None or depth < config.max_depth)
                and rows.size >= config.min_samples_split
                and np.count_nonzero(node_counts) > 1):
            split = best_split(X[rows], y[rows], config.min_gain, k)
        if split is None:
            counts[node] = node_counts
            continue
        go_left = X[rows, split.feature_index] < split.threshold
        feature[node] = split.feature_index
        threshold[node] = split.threshold
        left[node] = new_node()
        right[node] = new_node()
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], rows[~go_left], depth + 1))
        stack.append((left[node], rows[go_left], depth + 1))

    return DecisionTree(np.array(feature, dtype=np.int64), np.array(threshold),
                        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                        np.array(counts, dtype=np.int64))


def check_rows(X, n_features=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if n_features is not None and X.shape[1] != n_features:
        raise PredictError(f"expected {n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise PredictError("input contains non-finite feature values")
    return X


def apply_nodes(feature, threshold, left, right, X):
    """Leaf index reached by every row of ``X`` (strict < goes left)."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = feature[node] != LEAF
    while active.any():
        rows = np.flatnonzero(active)
        cur = node[rows]
        goes_left = X[rows, feature[cur]] < threshold[cur]
        node[rows] = np.where(goes_left, left[cur], right[cur])
        active[rows] = feature[node[rows]] != LEAF
    return node


def _max_feature(tree):
    return int(tree.feature.max()) + 1 if tree.feature.max() >= 0 else 0


def predict_tree_batch(tree, X):
    X = check_rows(X)
    if X.shape[1] < _max_feature(tree):
        raise PredictError(f"tree needs {_max_feature(tree)} features, got {X.shape[1]}")
    leaves = apply_nodes(tree.feature, tree.threshold, tree.left, tree.right, X)
    return tree.leaf_classes[leaves]


def predict_tree(tree, row):
    """Class id for a single row; leaf count ties go to the lowest class."""
    return int(predict_tree_batch(tree, row)[0])
