import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from posture_stack.errors import DomainError
from posture_stack.metrics import (ALGORITHMS, LAYERS, MetricsReport, confusion_matrix,
                                   format_percent, metric_set, per_class, render_report)


def brute_force_metrics(y_true, y_pred, k):
    """Accuracy and macro P/R/F1 straight from the label vectors."""
    n = len(y_true)
    acc = sum(t == p for t, p in zip(y_true, y_pred)) / n
    ps, rs, fs = [], [], []
    for c in range(k):
        tp = sum(t == c and p == c for t, p in zip(y_true, y_pred))
        fp = sum(t != c and p == c for t, p in zip(y_true, y_pred))
        fn = sum(t == c and p != c for t, p in zip(y_true, y_pred))
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        ps.append(prec)
        rs.append(rec)
        fs.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return acc, sum(ps) / k, sum(rs) / k, sum(fs) / k


def label_pairs(k=3, max_size=200):
    return st.integers(1, max_size).flatmap(lambda n: st.tuples(
        st.lists(st.integers(0, k - 1), min_size=n, max_size=n),
        st.lists(st.integers(0, k - 1), min_size=n, max_size=n)))


def full_report(value=1.0, cm=None):
    ms = metric_set(cm if cm is not None else np.eye(3, dtype=int) * 12)
    metrics = {(l, a): ms for l in LAYERS for a in ALGORITHMS}
    cms = {(l, a): (cm if cm is not None else np.eye(3, dtype=int) * 12)
           for l in LAYERS for a in ALGORITHMS}
    return MetricsReport(metrics, cms, {"n": 36, "seed": 42, "mode": "paper"})


class TestConfusionMatrix:
    def test_example(self):
        cm = confusion_matrix([0, 1, 2, 2], [0, 2, 2, 2], 3)
        assert cm.tolist() == [[1, 0, 0], [0, 0, 1], [0, 0, 2]]

    def test_identity(self):
        y = [0, 1, 2, 1, 0]
        cm = confusion_matrix(y, y, 3)
        assert np.count_nonzero(cm - np.diag(np.diag(cm))) == 0

    def test_single_row(self):
        assert confusion_matrix([1], [0], 3).tolist() == [[0, 0, 0], [1, 0, 0], [0, 0, 0]]

    @pytest.mark.parametrize("t, p", [([0, 1], [0]), ([0, 3], [0, 0]), ([], [])])
    def test_errors(self, t, p):
        with pytest.raises(DomainError):
            confusion_matrix(t, p, 3)

    @given(label_pairs())
    def test_total(self, pair):
        t, p = pair
        assert confusion_matrix(t, p, 3).sum() == len(t)


class TestMetricSet:
    def test_worked_example(self):
        cm = np.array([[1, 0, 0], [0, 0, 1], [0, 0, 2]])
        prec, rec, f1 = per_class(cm)
        np.testing.assert_allclose(prec, [1, 0, 2 / 3])
        np.testing.assert_allclose(rec, [1, 0, 1])
        np.testing.assert_allclose(f1, [1, 0, 0.8])
        ms = metric_set(cm)
        assert ms.accuracy == 0.75
        assert ms.macro_precision == pytest.approx(5 / 9)
        assert ms.macro_recall == pytest.approx(2 / 3)
        assert ms.macro_f1 == pytest.approx(0.6)

    def test_29_of_36(self):
        cm = np.diag([10, 10, 9])
        cm[2, 0] = 7
        assert metric_set(cm).accuracy == pytest.approx(0.80556, abs=5e-6)

    def test_perfect(self):
        ms = metric_set(np.diag([4, 5, 6]))
        assert ms.as_dict() == {"accuracy": 1.0, "macro_precision": 1.0,
                                "macro_recall": 1.0, "macro_f1": 1.0}

    def test_empty(self):
        with pytest.raises(DomainError):
            metric_set(np.zeros((3, 3), dtype=int))

    @settings(max_examples=150)
    @given(label_pairs())
    def test_matches_brute_force(self, pair):
        t, p = pair
        ms = metric_set(confusion_matrix(t, p, 3))
        want = brute_force_metrics(t, p, 3)
        np.testing.assert_allclose([ms.accuracy, ms.macro_precision, ms.macro_recall,
                                    ms.macro_f1], want, atol=1e-12)

    @given(label_pairs(), st.permutations([0, 1, 2]))
    def test_permutation_invariance(self, pair, perm):
        t, p = pair
        a = metric_set(confusion_matrix(t, p, 3))
        b = metric_set(confusion_matrix([perm[v] for v in t], [perm[v] for v in p], 3))
        np.testing.assert_allclose(list(a.as_dict().values()), list(b.as_dict().values()),
                                   atol=1e-12)

    @given(label_pairs())
    def test_f1_between_precision_and_recall(self, pair):
        prec, rec, f1 = per_class(confusion_matrix(*pair, 3))
        for p, r, f in zip(prec, rec, f1):
            if p > 0 and r > 0:
                assert min(p, r) - 1e-12 <= f <= max(p, r) + 1e-12


class TestRender:
    @pytest.mark.parametrize("value, text", [
        (29 / 36, "80.56%"), (1.0, "100.00%"), (0.0, "0.00%"), (0.80555, "80.56%"),
        (0.125, "12.50%"), (0.00125, "0.13%"),
    ])
    def test_format_percent(self, value, text):
        assert format_percent(value) == text

    def test_all_perfect_table(self):
        table = render_report(full_report(), "table")
        rows = [l for l in table.splitlines() if l.startswith(("Decision", "Random", "XGBoost"))]
        assert len(rows) == 6
        for row in rows:
            assert row.split()[-4:] == ["100.00%"] * 4
        assert "Accuracy" in table and "Layer 2" in table

    def test_json_stable(self):
        a = render_report(full_report(), "json")
        assert a == render_report(full_report(), "json")
        doc = json.loads(a)
        assert set(doc["layers"]) == {"1", "2"}
        cell = doc["layers"]["2"]["boost"]
        assert set(cell) == {"accuracy", "macro_precision", "macro_recall", "macro_f1",
                             "confusion"}
        assert cell["confusion"] == (np.eye(3, dtype=int) * 12).tolist()

    def test_json_six_decimals(self):
        cm = np.diag([10, 10, 9])
        cm[2, 0] = 7
        doc = json.loads(render_report(full_report(cm=cm), "json"))
        assert doc["layers"]["1"]["tree"]["accuracy"] == 0.805556

    def test_incomplete_grid(self):
        with pytest.raises(DomainError):
            MetricsReport({(1, "tree"): metric_set(np.eye(3))}, {})
