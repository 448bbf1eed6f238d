"""Gradient-boosted regression trees with a multiclass softmax objective.

Each round fits one regression tree per class on the softmax gradients and
diagonal hessians. Trees grow greedily to ``max_depth`` on the raw
second-order gain; the ``gamma`` penalty is applied afterwards by a
bottom-up pruning pass.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _serial
from .errors import ConfigError, DomainError, FitError, ModelLoadError
from .tree import LEAF, _decode_nodes, apply_nodes, check_rows, pick_split, sorted_columns


class DegenerateLeafError(DomainError):
    pass


@dataclass(frozen=True)
class BoostConfig:
    n_rounds: int = 50
    eta: float = 0.3
    reg_lambda: float = 1.0
    gamma: float = 0.0
    max_depth: int = 3

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ConfigError("n_rounds must be >= 1")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must lie in (0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0:
            raise ConfigError("lambda and gamma must be >= 0")
        if self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")

    def to_dict(self):
        return {"n_rounds": self.n_rounds, "eta": self.eta, "lambda": self.reg_lambda,
                "gamma": self.gamma, "max_depth": self.max_depth}

    @classmethod
    def from_dict(cls, d):
        return cls(d["n_rounds"], d["eta"], d["lambda"], d["gamma"], d["max_depth"])


@dataclass(frozen=True)
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray

    @property
    def n_nodes(self):
        return int(self.feature.shape[0])

    def predict(self, X):
        return self.weight[apply_nodes(self.feature, self.threshold, self.left, self.right, X)]

    def to_dict(self):
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] == LEAF:
                nodes.append({"kind": "leaf", "weight": float(self.weight[i])})
            else:
                nodes.append({"kind": "split", "feature_index": int(self.feature[i]),
                              "threshold": float(self.threshold[i]),
                              "left": int(self.left[i]), "right": int(self.right[i])})
        return {"nodes": nodes}

    @classmethod
    def from_dict(cls, d, path="tree"):
        nodes = _serial.field(d, "nodes", path, list)
        arrays = _decode_nodes(nodes, f"{path}.nodes",
                               lambda node, where: _serial.field(node, "weight", where, float))
        weight = np.zeros(len(nodes))
        for i, w in arrays.pop("payload").items():
            weight[i] = w
        return cls(weight=weight, **arrays)


@dataclass(frozen=True)
class BoostedModel:
    trees: tuple  # trees[k][r]: class k, round r
    base_score: float
    config: BoostConfig
    n_features: int

    @property
    def n_classes(self):
        return len(self.trees)

    def to_dict(self):
        return {"config": self.config.to_dict(), "base_score": self.base_score,
                "n_features": self.n_features,
                "trees": [[t.to_dict() for t in per_class] for per_class in self.trees]}

    @classmethod
    def from_dict(cls, d, path="boost"):
        try:
            config = BoostConfig.from_dict(_serial.field(d, "config", path, dict))
        except (KeyError, TypeError, ConfigError) as exc:
            raise ModelLoadError(f"{path}.config", str(exc)) from None
        base = _serial.field(d, "base_score", path, float)
        n_features = _serial.field(d, "n_features", path, int)
        per_class = _serial.field(d, "trees", path, list)
        if len(per_class) < 2:
            raise ModelLoadError(f"{path}.trees", "need at least 2 classes")
        trees = []
        for k, rounds in enumerate(per_class):
            where = f"{path}.trees[{k}]"
            if not isinstance(rounds, list) or len(rounds) != config.n_rounds:
                raise ModelLoadError(where, f"expected {config.n_rounds} trees")
            trees.append(tuple(RegressionTree.from_dict(t, f"{where}[{r}]")
                               for r, t in enumerate(rounds)))
        return cls(tuple(trees), float(base), config, n_features)


def softmax(logits):
    """Row-wise softmax over the last axis, max-shifted for stability."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def grad_hess(probs, true_class):
    """Softmax cross-entropy gradient and diagonal hessian. Accepts one
    probability vector with a class id, or a row matrix with a label vector."""
    p = np.asarray(probs, dtype=np.float64)
    target = np.zeros_like(p)
    np.put_along_axis(target, np.asarray(true_class, dtype=np.int64)[..., None], 1.0, axis=-1)
    return p - target, p * (1.0 - p)


def leaf_weight(G, H, reg_lambda):
    denom = H + reg_lambda
    if denom <= 0:
        raise DegenerateLeafError(f"H + lambda = {denom} leaves the Newton step undefined")
    return -G / denom


def split_gain(GL, HL, GR, HR, reg_lambda, gamma=0.0):
    G, H = GL + GR, HL + HR
    return 0.5 * (GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda)
                  - G * G / (H + reg_lambda)) - gamma


def newton_gains(X, g, h, reg_lambda):
    """Second-order gain (gamma = 0) of cutting after each sorted position."""
    order, xs, valid = sorted_columns(X)
    GL = np.cumsum(g[order], axis=0)[:-1]
    HL = np.cumsum(h[order], axis=0)[:-1]
    GR, HR = g.sum() - GL, h.sum() - HL
    valid &= (HL + reg_lambda > 0) & (HR + reg_lambda > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = split_gain(GL, HL, GR, HR, reg_lambda)
    return xs, gains, valid


def fit_round_tree(gradients, hessians, features, config=BoostConfig()):
    """Grow a depth-limited regression tree, then prune splits with gain < gamma."""
    g = np.asarray(gradients, dtype=np.float64)
    h = np.asarray(hessians, dtype=np.float64)
    X = np.asarray(features, dtype=np.float64)
    if not g.shape == h.shape == (X.shape[0],):
        raise FitError("gradient, hessian and row counts differ")
    lam = config.reg_lambda

    # node records: [feature, threshold, left, right, G, H, gain]
    nodes = []

    def grow(rows, depth):
        node = len(nodes)
        nodes.append([LEAF, 0.0, LEAF, LEAF, float(g[rows].sum()), float(h[rows].sum()), 0.0])
        if depth >= config.max_depth or rows.size < 2:
            return node
        split = pick_split(*newton_gains(X[rows], g[rows], h[rows], lam), 0.0)
        if split is None:
            return node
        go_left = X[rows, split.feature_index] < split.threshold
        nodes[node][0:2] = [split.feature_index, split.threshold]
        nodes[node][6] = split.gain
        nodes[node][2] = grow(rows[go_left], depth + 1)
        nodes[node][3] = grow(rows[~go_left], depth + 1)
        return node

    def prune(node):
        rec = nodes[node]
        if rec[0] == LEAF:
            return
        prune(rec[2])
        prune(rec[3])
        if nodes[rec[2]][0] == LEAF and nodes[rec[3]][0] == LEAF and rec[6] < config.gamma:
            rec[0:4] = [LEAF, 0.0, LEAF, LEAF]

    grow(np.arange(X.shape[0]), 0)
    prune(0)
    return _compact(nodes, lam)


def _compact(nodes, lam):
    """Drop nodes orphaned by pruning, renumbering in preorder."""
    feature, threshold, left, right, weight = [], [], [], [], []

    def emit(old):
        new = len(feature)
        f, t, lo, hi, G, H, _ = nodes[old]
        feature.append(f)
        threshold.append(t if f != LEAF else 0.0)
        left.append(LEAF)
        right.append(LEAF)
        weight.append(leaf_weight(G, H, lam) if f == LEAF else 0.0)
        if f != LEAF:
            left[new] = emit(lo)
            right[new] = emit(hi)
        return new

    emit(0)
    return RegressionTree(np.array(feature, dtype=np.int64), np.array(threshold),
                          np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                          np.array(weight))


def log_loss(logits, labels):
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(z.shape[0]), labels].mean())


def fit_boost(features, labels, config=BoostConfig(), n_classes=None, n_jobs=1):
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise FitError("cannot fit a boosted model on an empty training set")
    k = int(n_classes if n_classes is not None else y.max() + 1)
    if k < 2:
        raise FitError("boosting needs at least 2 classes")
    base_score = 0.0
    logits = np.full((X.shape[0], k), base_score)
    trees = [[] for _ in range(k)]
    pool = ThreadPoolExecutor(max_workers=n_jobs) if n_jobs > 1 else None
    try:
        for _ in range(config.n_rounds):
            grad, hess = grad_hess(softmax(logits), y)

            def work(c):
                return fit_round_tree(grad[:, c], hess[:, c], X, config)

            round_trees = list(pool.map(work, range(k))) if pool else [work(c) for c in range(k)]
            for c, tree in enumerate(round_trees):
                trees[c].append(tree)
                logits[:, c] += config.eta * tree.predict(X)
    finally:
        if pool:
            pool.shutdown()
    return BoostedModel(tuple(tuple(t) for t in trees), base_score, config, X.shape[1])


def predict_logits(model, X, n_rounds=None):
    """Raw class scores, optionally truncated to the first ``n_rounds`` rounds."""
    X = check_rows(X, model.n_features)
    rounds = model.config.n_rounds if n_rounds is None else n_rounds
    logits = np.full((X.shape[0], model.n_classes), model.base_score)
    for r in range(rounds):
        for c in range(model.n_classes):
            logits[:, c] += model.config.eta * model.trees[c][r].predict(X)
    return logits


def predict_proba_batch(model, X):
    return softmax(predict_logits(model, X))


def predict_boost_batch(model, X):
    return np.argmax(predict_proba_batch(model, X), axis=1)


def predict_proba(model, row):
    return predict_proba_batch(model, row)[0]


def predict_boost(model, row):
    return int(predict_boost_batch(model, row)[0])
