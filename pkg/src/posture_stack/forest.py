"""Random forest: bootstrap-resampled trees on per-tree feature subsets,
combined by majority vote."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _serial
from .errors import ConfigError, DomainError, FitError, ModelLoadError
from .tree import DecisionTree, TreeConfig, check_rows, fit_tree, predict_tree_batch


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_features: Union[int, str] = "sqrt"
    bootstrap: bool = True
    tree: TreeConfig = field(default_factory=TreeConfig)
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if isinstance(self.max_features, str):
            if self.max_features != "sqrt":
                raise ConfigError(f"unknown max_features {self.max_features!r}")
        elif self.max_features < 1:
            raise ConfigError("max_features must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def resolve_max_features(self, arity):
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(arity)))
        if self.max_features > arity:
            raise ConfigError(f"max_features={self.max_features} exceeds arity {arity}")
        return int(self.max_features)

    def to_dict(self):
        return {"n_trees": self.n_trees, "max_features": self.max_features,
                "bootstrap": self.bootstrap, "tree": self.tree.to_dict(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(d["n_trees"], d["max_features"], d["bootstrap"],
                   TreeConfig.from_dict(d["tree"]), d["seed"])


@dataclass(frozen=True)
class Forest:
    trees: tuple
    feature_subsets: tuple
    config: ForestConfig
    n_features: int

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "n_features": self.n_features,
            "members": [{"features": [int(f) for f in s], "tree": t.to_dict()}
                        for s, t in zip(self.feature_subsets, self.trees)],
        }

    @classmethod
    def from_dict(cls, d, path="forest"):
        try:
            config = ForestConfig.from_dict(_serial.field(d, "config", path, dict))
        except (KeyError, TypeError, ConfigError) as exc:
            raise ModelLoadError(f"{path}.config", str(exc)) from None
        n_features = _serial.field(d, "n_features", path, int)
        members = _serial.field(d, "members", path, list)
        if len(members) != config.n_trees:
            raise ModelLoadError(f"{path}.members",
                                 f"expected {config.n_trees} trees, got {len(members)}")
        trees, subsets = [], []
        for i, m in enumerate(members):
            where = f"{path}.members[{i}]"
            subset = _serial.number_list(_serial.field(m, "features", where),
                                         f"{where}.features", integer=True)
            if any(not 0 <= f < n_features for f in subset) or len(set(subset)) != len(subset):
                raise ModelLoadError(f"{where}.features", "invalid feature subset")
            tree = DecisionTree.from_dict(_serial.field(m, "tree", where, dict), f"{where}.tree")
            if tree.feature.max() >= len(subset):
                raise ModelLoadError(f"{where}.tree", "split feature outside its subset")
            subsets.append(np.array(subset, dtype=np.int64))
            trees.append(tree)
        return cls(tuple(trees), tuple(subsets), config, n_features)


def tree_rng(seed, index):
    """Independent generator for tree ``index``; stable under parallel fitting."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def bootstrap_sample(n, rng):
    if n < 1:
        raise DomainError("bootstrap needs n >= 1")
    return rng.integers(0, n, size=n)


def _fit_member(X, y, config, n_classes, index, n_sub):
    rng = tree_rng(config.seed, index)
    n, arity = X.shape
    rows = bootstrap_sample(n, rng) if config.bootstrap else np.arange(n)
    if n_sub == arity:
        subset = np.arange(arity)
    else:
        subset = np.sort(rng.choice(arity, size=n_sub, replace=False))
    tree = fit_tree(X[np.ix_(rows, subset)], y[rows], config.tree, n_classes)
    return subset, tree


def fit_forest(features, labels, config=ForestConfig(), n_classes=None, n_jobs=1):
    """Fit ``config.n_trees`` trees. ``n_jobs > 1`` fits trees on a thread pool;
    the result is identical to sequential fitting."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise FitError("cannot fit a forest on an empty training set")
    k = int(n_classes if n_classes is not None else y.max() + 1)
    n_sub = config.resolve_max_features(X.shape[1])

    def work(i):
        return _fit_member(X, y, config, k, i, n_sub)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            members = list(pool.map(work, range(config.n_trees)))
    else:
        members = [work(i) for i in range(config.n_trees)]
    subsets, trees = zip(*members)
    return Forest(tuple(trees), tuple(subsets), config, X.shape[1])


def majority_vote(votes, n_classes=None):
    votes = np.asarray(votes, dtype=np.int64)
    if votes.size == 0:
        raise DomainError("majority vote over zero votes")
    return int(np.argmax(np.bincount(votes, minlength=n_classes or 0)))


def tree_votes(forest, X):
    """(n_rows, n_trees) matrix of per-tree class predictions."""
    X = check_rows(X, forest.n_features)
    return np.column_stack([predict_tree_batch(t, X[:, s])
                            for t, s in zip(forest.trees, forest.feature_subsets)])


def predict_forest_batch(forest, X):
    votes = tree_votes(forest, X)
    k = forest.trees[0].n_classes
    tallies = np.zeros((votes.shape[0], k), dtype=np.int64)
    for col in votes.T:
        tallies[np.arange(votes.shape[0]), col] += 1
    # argmax returns the first maximum: ties go to the lowest class id
    return np.argmax(tallies, axis=1)


def predict_forest(forest, row):
    return int(predict_forest_batch(forest, row)[0])
