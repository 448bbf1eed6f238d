import time
from collections import defaultdict

import numpy as np
import pytest

from posture_stack import dataset as ds
from posture_stack.boost import BoostConfig, BoostedModel, RegressionTree
from posture_stack.forest import Forest, ForestConfig
from posture_stack.stack import LayerModels, StackConfig, StackedModel, meta_arity
from posture_stack.tree import DecisionTree

SUITE_BUDGET_S = 60.0

_criteria = defaultdict(list)
_descriptions = {}
_session_start = [0.0]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")


def pytest_sessionstart(session):
    _session_start[0] = time.perf_counter()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    _descriptions[number] = text
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[number].append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    elapsed = time.perf_counter() - _session_start[0]
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        ok = all(_criteria[number])
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {_descriptions[number]}")
    ok = elapsed < SUITE_BUDGET_S
    tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion 9: full suite wall-clock "
                  f"{elapsed:.1f} s < {SUITE_BUDGET_S:.0f} s")


def pytest_sessionfinish(session, exitstatus):
    if time.perf_counter() - _session_start[0] >= SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = 1


@pytest.fixture(scope="session")
def seed42_data():
    """The shipped generator: 180 rows, 60 per class, seed 42."""
    return ds.generate(ds.separated_params(42), 180)


@pytest.fixture(scope="session")
def seed42_split(seed42_data):
    return ds.split(seed42_data, 0.2, 42)


@pytest.fixture(scope="session")
def seed42_scaled(seed42_split):
    train, _ = seed42_split
    return ds.fit_scaler(train).transform(train.features), train.labels


@pytest.fixture(scope="session")
def fixture_rows():
    """1 000 rows drawn from a different seed, for prediction cross-checks."""
    return ds.generate(ds.noisy_params(7), 1002).features[:1000]


def _leaf_tree(cls, k=3):
    counts = np.zeros((1, k), dtype=np.int64)
    counts[0, cls] = 5
    return DecisionTree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), counts)


def _constant_layer(cls, n_features, k=3):
    forest = Forest(tuple(_leaf_tree(cls, k) for _ in range(3)),
                    tuple(np.arange(n_features) for _ in range(3)),
                    ForestConfig(n_trees=3, max_features=n_features), n_features)
    per_class = tuple(
        (RegressionTree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                        np.array([1.0 if c == cls else 0.0])),)
        for c in range(k))
    boost = BoostedModel(per_class, 0.0, BoostConfig(n_rounds=1), n_features)
    return LayerModels(_leaf_tree(cls, k), forest, boost)


def make_constant_model(cls):
    """Stacked model whose six sub-models all predict ``cls``."""
    scaler = ds.ScalerParams(np.zeros(4), np.ones(4))
    arity = meta_arity(4, 3)
    return StackedModel(scaler, _constant_layer(cls, 4), _constant_layer(cls, arity),
                        StackConfig(mode="paper"), 3, arity)


@pytest.fixture
def constant_model():
    return make_constant_model
