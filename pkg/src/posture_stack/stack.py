"""Two-layer stacked ensemble of {tree, forest, boost}.

Layer 1 fits the three learners on scaled features. Their hard class
predictions, one-hot encoded and (by default) appended to the scaled
features, train a second {tree, forest, boost} triple.

Two protocols produce the layer-2 training inputs:

* ``paper``: layer-1 models predict the very rows they were fitted on.
  Those in-sample predictions are optimistic, so layer-2 training scores
  are inflated.
* ``oof``: stratified k-fold out-of-fold predictions; each row's meta
  features come from clones that never saw it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _serial
from .boost import BoostConfig, BoostedModel, fit_boost, predict_boost_batch
from .dataset import ScalerParams, fit_scaler
from .errors import ConfigError, EvaluationError, FitError, ModelLoadError
from .forest import Forest, ForestConfig, fit_forest, predict_forest_batch
from .metrics import ALGORITHMS, MetricsReport
from .tree import DecisionTree, TreeConfig, check_rows, fit_tree, predict_tree_batch

MODES = ("paper", "oof")
META_INPUTS = ("augmented", "predictions_only")


@dataclass(frozen=True)
class LayerConfig:
    tree: TreeConfig = field(default_factory=TreeConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    boost: BoostConfig = field(default_factory=BoostConfig)

    def to_dict(self):
        return {"tree": self.tree.to_dict(), "forest": self.forest.to_dict(),
                "boost": self.boost.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(TreeConfig.from_dict(d["tree"]), ForestConfig.from_dict(d["forest"]),
                   BoostConfig.from_dict(d["boost"]))


@dataclass(frozen=True)
class StackConfig:
    mode: str = "oof"
    k_folds: int = 5
    meta_input: str = "augmented"
    seed: int = 42
    layer1: LayerConfig = field(default_factory=LayerConfig)
    layer2: LayerConfig = field(default_factory=LayerConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.meta_input not in META_INPUTS:
            raise ConfigError(f"meta_input must be one of {META_INPUTS}")
        if self.mode == "oof" and self.k_folds < 2:
            raise ConfigError("oof stacking needs k_folds >= 2")

    @classmethod
    def seeded(cls, seed=42, mode="oof", **kwargs):
        """Config with forest seeds derived from one master seed."""
        def layer(offset):
            return LayerConfig(forest=ForestConfig(seed=seed + offset))
        kwargs.setdefault("layer1", layer(0))
        kwargs.setdefault("layer2", layer(1))
        return cls(mode=mode, seed=seed, **kwargs)

    def to_dict(self):
        return {"mode": self.mode, "k_folds": self.k_folds, "meta_input": self.meta_input,
                "seed": self.seed, "layer1": self.layer1.to_dict(),
                "layer2": self.layer2.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mode"], d["k_folds"], d["meta_input"], d["seed"],
                   LayerConfig.from_dict(d["layer1"]), LayerConfig.from_dict(d["layer2"]))


@dataclass(frozen=True)
class LayerModels:
    tree: DecisionTree
    forest: Forest
    boost: BoostedModel

    def predict(self, X):
        """(n_rows, 3) class ids in ``ALGORITHMS`` order."""
        return np.column_stack([predict_tree_batch(self.tree, X),
                                predict_forest_batch(self.forest, X),
                                predict_boost_batch(self.boost, X)])

    def to_dict(self):
        return {"tree": self.tree.to_dict(), "forest": self.forest.to_dict(),
                "boost": self.boost.to_dict()}

    @classmethod
    def from_dict(cls, d, path):
        return cls(
            DecisionTree.from_dict(_serial.field(d, "tree", path, dict), f"{path}.tree"),
            Forest.from_dict(_serial.field(d, "forest", path, dict), f"{path}.forest"),
            BoostedModel.from_dict(_serial.field(d, "boost", path, dict), f"{path}.boost"),
        )


@dataclass(frozen=True)
class OOFRecord:
    """Fold bookkeeping: ``fold_ids[i]`` is the fold holding out row ``i``;
    ``fold_train_rows[f]`` are the rows the fold-``f`` clones were fit on."""

    fold_ids: np.ndarray
    fold_train_rows: tuple


@dataclass(frozen=True)
class StackedModel:
    scaler: ScalerParams
    layer1: LayerModels
    layer2: LayerModels
    config: StackConfig
    n_classes: int
    meta_arity: int
    oof: Optional[OOFRecord] = field(default=None, compare=False)

    def to_dict(self):
        return {"config": self.config.to_dict(), "n_classes": self.n_classes,
                "meta_arity": self.meta_arity, "layer1": self.layer1.to_dict(),
                "layer2": self.layer2.to_dict()}


@dataclass(frozen=True)
class LayeredPredictions:
    """Class ids per row: ``layer1`` and ``layer2`` are (n_rows, 3) in
    (tree, forest, boost) order."""

    layer1: np.ndarray
    layer2: np.ndarray

    def row(self, i):
        return (tuple(int(v) for v in self.layer1[i]), tuple(int(v) for v in self.layer2[i]))

    def by_model(self):
        out = {}
        for layer, preds in ((1, self.layer1), (2, self.layer2)):
            for j, algo in enumerate(ALGORITHMS):
                out[layer, algo] = preds[:, j]
        return out


def meta_arity(n_features, n_classes, mode="augmented"):
    blocks = len(ALGORITHMS) * n_classes
    return n_features + blocks if mode == "augmented" else blocks


def meta_matrix(original, base_preds, n_classes, mode="augmented"):
    """Batch form of :func:`meta_features`."""
    X = np.atleast_2d(np.asarray(original, dtype=np.float64))
    P = np.atleast_2d(np.asarray(base_preds, dtype=np.int64))
    if P.min() < 0 or P.max() >= n_classes:
        raise ConfigError("base predictions outside the class range")
    n, m = P.shape
    onehot = np.zeros((n, m * n_classes))
    onehot[np.arange(n)[:, None], np.arange(m) * n_classes + P] = 1.0
    if mode == "augmented":
        return np.hstack([X, onehot])
    if mode == "predictions_only":
        return onehot
    raise ConfigError(f"unknown meta_input mode {mode!r}")


def meta_features(original, base_preds, mode="augmented", n_classes=3):
    return meta_matrix(original, [base_preds], n_classes, mode)[0]


def _fit_layer(X, y, layer_config, n_classes, n_jobs):
    return LayerModels(
        fit_tree(X, y, layer_config.tree, n_classes),
        fit_forest(X, y, layer_config.forest, n_classes, n_jobs=n_jobs),
        fit_boost(X, y, layer_config.boost, n_classes, n_jobs=n_jobs),
    )


def stratified_folds(labels, k, seed):
    """Fold id per row; each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x0F01D]))
    fold_ids = np.empty(labels.shape[0], dtype=np.int64)
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        fold_ids[members] = np.arange(members.size) % k
    return fold_ids


def out_of_fold_predictions(X, y, config, n_classes, n_jobs=1):
    """Layer-1 predictions for every row from clones fitted without it."""
    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts < config.k_folds):
        raise ConfigError(
            f"oof stacking with {config.k_folds} folds needs every class to have "
            f">= {config.k_folds} rows; class counts are {counts.tolist()}")
    fold_ids = stratified_folds(y, config.k_folds, config.seed)
    preds = np.empty((X.shape[0], len(ALGORITHMS)), dtype=np.int64)
    fold_train_rows = []
    for f in range(config.k_folds):
        held = fold_ids == f
        rows = np.flatnonzero(~held)
        clones = _fit_layer(X[rows], y[rows], config.layer1, n_classes, n_jobs)
        preds[held] = clones.predict(X[held])
        fold_train_rows.append(rows)
    return preds, OOFRecord(fold_ids, tuple(fold_train_rows))


def fit_stack(train, config=StackConfig(), n_jobs=1):
    """Fit scaler, layer-1 learners and layer-2 meta learners on ``train``."""
    if len(train) == 0:
        raise FitError("cannot fit a stack on an empty training set")
    k = train.schema.n_classes
    scaler = fit_scaler(train)
    X = scaler.transform(train.features)
    y = train.labels
    layer1 = _fit_layer(X, y, config.layer1, k, n_jobs)
    record = None
    if config.mode == "paper":
        base = layer1.predict(X)
    else:
        base, record = out_of_fold_predictions(X, y, config, k, n_jobs)
    meta = meta_matrix(X, base, k, config.meta_input)
    layer2 = _fit_layer(meta, y, config.layer2, k, n_jobs)
    return StackedModel(scaler, layer1, layer2, config, k, meta.shape[1], record)


def predict_stack_batch(model, X):
    """Scale raw rows, run both layers, return every sub-model's prediction."""
    X = check_rows(X, model.scaler.means.shape[0])
    Xs = model.scaler.transform(X)
    first = model.layer1.predict(Xs)
    meta = meta_matrix(Xs, first, model.n_classes, model.config.meta_input)
    return LayeredPredictions(first, model.layer2.predict(meta))


def predict_stack(model, row):
    """``((tree, forest, boost) layer 1, (tree, forest, boost) layer 2)`` for one row."""
    return predict_stack_batch(model, row).row(0)


def evaluate_stack(model, test, provenance=None):
    if len(test) == 0:
        raise EvaluationError("cannot evaluate on an empty dataset")
    preds = predict_stack_batch(model, test.features)
    return MetricsReport.from_predictions(test.labels, preds.by_model(), model.n_classes,
                                          provenance)


def stacked_model_from_dict(d, scaler, path="model"):
    try:
        config = StackConfig.from_dict(_serial.field(d, "config", path, dict))
    except (KeyError, TypeError, ConfigError) as exc:
        raise ModelLoadError(f"{path}.config", str(exc)) from None
    k = _serial.field(d, "n_classes", path, int)
    arity = _serial.field(d, "meta_arity", path, int)
    if arity != meta_arity(scaler.means.shape[0], k, config.meta_input):
        raise ModelLoadError(f"{path}.meta_arity", f"{arity} inconsistent with meta_input")
    layer1 = LayerModels.from_dict(_serial.field(d, "layer1", path, dict), f"{path}.layer1")
    layer2 = LayerModels.from_dict(_serial.field(d, "layer2", path, dict), f"{path}.layer2")
    return StackedModel(scaler, layer1, layer2, config, k, arity)
