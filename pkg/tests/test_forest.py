import json

import numpy as np
import pytest

from posture_stack.errors import ConfigError, DomainError, FitError
from posture_stack.forest import (Forest, ForestConfig, bootstrap_sample, fit_forest,
                                  majority_vote, predict_forest, predict_forest_batch,
                                  tree_rng, tree_votes)
from posture_stack.tree import DecisionTree, TreeConfig, fit_tree, predict_tree_batch


def leaf(cls, k=3):
    counts = np.zeros((1, k), dtype=np.int64)
    counts[0, cls] = 1
    return DecisionTree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), counts)


def stump(threshold, below, above, k=3):
    counts = np.zeros((3, k), dtype=np.int64)
    counts[1, below] = counts[2, above] = 4
    return DecisionTree(np.array([0, -1, -1]), np.array([threshold, 0.0, 0.0]),
                        np.array([1, -1, -1]), np.array([2, -1, -1]), counts)


def hand_forest(trees, n_features=1):
    subsets = tuple(np.arange(n_features) for _ in trees)
    return Forest(tuple(trees), subsets, ForestConfig(n_trees=len(trees), max_features=n_features),
                  n_features)


class TestBootstrap:
    def test_single_element(self):
        for seed in range(5):
            assert bootstrap_sample(1, tree_rng(seed, 0)).tolist() == [0]

    def test_distinct_fraction_band(self):
        # expected distinct fraction 1 - (1 - 1/50)^50 ~ 0.636
        counts = [np.unique(bootstrap_sample(50, tree_rng(s, 0))).size for s in range(100)]
        assert all(20 <= c <= 42 for c in counts)
        assert np.mean(counts) / 50 == pytest.approx(1 - (1 - 1 / 50) ** 50, abs=0.03)

    def test_same_state_same_sample(self):
        assert np.array_equal(bootstrap_sample(30, tree_rng(4, 2)),
                              bootstrap_sample(30, tree_rng(4, 2)))

    def test_empty(self):
        with pytest.raises(DomainError):
            bootstrap_sample(0, tree_rng(0, 0))


class TestMajorityVote:
    @pytest.mark.parametrize("votes, expected", [([0, 0, 2], 0), ([0, 1, 2], 0), ([2, 1], 1)])
    def test_examples(self, votes, expected):
        assert majority_vote(votes) == expected

    def test_hundred_votes(self):
        votes = [0] * 33 + [1] * 34 + [2] * 33
        assert majority_vote(np.random.default_rng(0).permutation(votes)) == 1

    def test_empty(self):
        with pytest.raises(DomainError):
            majority_vote([])


class TestFitForest:
    def test_degenerate_equals_tree(self, seed42_scaled, fixture_rows):
        X, y = seed42_scaled
        forest = fit_forest(X, y, ForestConfig(n_trees=1, bootstrap=False, max_features=4), 3)
        tree = fit_tree(X, y, TreeConfig(), 3)
        assert np.array_equal(predict_forest_batch(forest, fixture_rows),
                              predict_tree_batch(tree, fixture_rows))

    def test_no_randomness_means_identical_trees(self, seed42_scaled, fixture_rows):
        X, y = seed42_scaled
        forest = fit_forest(X, y, ForestConfig(n_trees=5, bootstrap=False, max_features=4), 3)
        first = forest.trees[0].to_dict()
        assert all(t.to_dict() == first for t in forest.trees)
        assert np.array_equal(predict_forest_batch(forest, fixture_rows),
                              predict_tree_batch(forest.trees[0], fixture_rows))

    def test_deterministic_and_parallel_safe(self, seed42_scaled):
        X, y = seed42_scaled
        config = ForestConfig(n_trees=20, seed=11)
        a = json.dumps(fit_forest(X, y, config, 3).to_dict())
        b = json.dumps(fit_forest(X, y, config, 3).to_dict())
        c = json.dumps(fit_forest(X, y, config, 3, n_jobs=4).to_dict())
        assert a == b == c

    def test_subsets(self, seed42_scaled):
        X, y = seed42_scaled
        forest = fit_forest(X, y, ForestConfig(n_trees=10), 3)
        assert len(forest.trees) == 10
        assert all(len(s) == 2 for s in forest.feature_subsets)  # ceil(sqrt(4))

    def test_separable_training_accuracy(self, seed42_data):
        forest = fit_forest(seed42_data.features, seed42_data.labels,
                            ForestConfig(n_trees=100, seed=42), 3)
        assert np.all(predict_forest_batch(forest, seed42_data.features) == seed42_data.labels)

    def test_empty(self):
        with pytest.raises(FitError):
            fit_forest(np.zeros((0, 4)), np.zeros(0, dtype=int))

    @pytest.mark.parametrize("kwargs", [{"n_trees": 0}, {"max_features": 0},
                                        {"max_features": "log2"}])
    def test_bad_config(self, kwargs):
        with pytest.raises(ConfigError):
            ForestConfig(**kwargs)

    def test_max_features_above_arity(self, seed42_scaled):
        X, y = seed42_scaled
        with pytest.raises(ConfigError):
            fit_forest(X, y, ForestConfig(max_features=5))


class TestPredictForest:
    def test_unanimous(self):
        assert predict_forest(hand_forest([leaf(2)] * 3), [0.3]) == 2

    def test_crafted_vote(self):
        forest = hand_forest([stump(1.0, 0, 1), stump(2.0, 2, 0), stump(0.0, 2, 1)])
        assert tree_votes(forest, [[1.5]]).tolist() == [[1, 2, 1]]
        assert predict_forest(forest, [1.5]) == 1

    def test_matches_brute_force_tally(self, seed42_scaled, fixture_rows):
        X, y = seed42_scaled
        forest = fit_forest(X, y, ForestConfig(n_trees=25, seed=3), 3)
        rows = (fixture_rows - fixture_rows.mean(0)) / fixture_rows.std(0)
        got = predict_forest_batch(forest, rows)
        for i, row in enumerate(rows):
            tally = {}
            for tree, subset in zip(forest.trees, forest.feature_subsets):
                node = 0
                while tree.feature[node] >= 0:
                    go_left = row[subset][tree.feature[node]] < tree.threshold[node]
                    node = tree.left[node] if go_left else tree.right[node]
                c = int(np.argmax(tree.class_counts[node]))
                tally[c] = tally.get(c, 0) + 1
            top = max(tally.values())
            assert got[i] == min(c for c, v in tally.items() if v == top)

    def test_round_trip(self, seed42_scaled, fixture_rows):
        X, y = seed42_scaled
        forest = fit_forest(X, y, ForestConfig(n_trees=10), 3)
        back = Forest.from_dict(json.loads(json.dumps(forest.to_dict())))
        assert np.array_equal(predict_forest_batch(back, fixture_rows),
                              predict_forest_batch(forest, fixture_rows))
