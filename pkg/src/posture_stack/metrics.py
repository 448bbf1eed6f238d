"""Confusion matrices, macro-averaged metrics and report rendering."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import DomainError

LAYERS = (1, 2)
ALGORITHMS = ("tree", "forest", "boost")
ALGORITHM_TITLES = {"tree": "Decision Tree", "forest": "Random Forest", "boost": "XGBoost"}
METRIC_KEYS = ("accuracy", "macro_precision", "macro_recall", "macro_f1")


def confusion_matrix(y_true, y_pred, n_classes):
    """``cm[i, j]`` counts rows of true class ``i`` predicted as ``j``."""
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise DomainError(f"label vectors differ in shape: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise DomainError("confusion matrix of zero rows")
    for name, v in (("y_true", t), ("y_pred", p)):
        if v.min() < 0 or v.max() >= n_classes:
            raise DomainError(f"{name} holds class ids outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def _ratio(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64), where=den > 0)


def per_class(cm):
    """Per-class precision, recall and F1, each 0 where undefined."""
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    precision = _ratio(tp, cm.sum(axis=0))
    recall = _ratio(tp, cm.sum(axis=1))
    f1 = _ratio(2.0 * precision * recall, precision + recall)
    return precision, recall, f1


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def as_dict(self):
        return {k: getattr(self, k) for k in METRIC_KEYS}


def metric_set(cm):
    cm = np.asarray(cm)
    total = cm.sum()
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or total < 1:
        raise DomainError("metrics need a non-empty square confusion matrix")
    precision, recall, f1 = per_class(cm)
    return MetricSet(float(np.trace(cm) / total), float(precision.mean()),
                     float(recall.mean()), float(f1.mean()))


@dataclass
class MetricsReport:
    """Layer x algorithm grid of metric sets with their confusion matrices."""

    metrics: dict  # (layer, algorithm) -> MetricSet
    confusion: dict  # (layer, algorithm) -> ndarray
    provenance: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [(l, a) for l in LAYERS for a in ALGORITHMS if (l, a) not in self.metrics]
        if missing:
            raise DomainError(f"report grid incomplete, missing {missing}")

    @classmethod
    def from_predictions(cls, y_true, predictions, n_classes, provenance=None):
        """``predictions`` maps (layer, algorithm) to predicted label vectors."""
        cms = {key: confusion_matrix(y_true, pred, n_classes) for key, pred in predictions.items()}
        return cls({key: metric_set(cm) for key, cm in cms.items()}, cms, dict(provenance or {}))

    def to_dict(self):
        layers = {}
        for layer in LAYERS:
            layers[str(layer)] = {}
            for algo in ALGORITHMS:
                entry = {k: round(v, 6) for k, v in self.metrics[layer, algo].as_dict().items()}
                entry["confusion"] = np.asarray(self.confusion[layer, algo]).tolist()
                layers[str(layer)][algo] = entry
        out = {"provenance": self.provenance, "layers": layers}
        out.update(self.extra)
        return out


def format_percent(value):
    """Fraction to a 2-decimal percent string, rounding halves away from zero."""
    pct = (Decimal(repr(float(value))) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{pct}%"


def render_table(report):
    headers = ("Algorithm", "Accuracy", "Precision", "F1 score", "Recall")
    lines = []
    for layer in LAYERS:
        rows = []
        for algo in ALGORITHMS:
            m = report.metrics[layer, algo]
            rows.append((ALGORITHM_TITLES[algo], format_percent(m.accuracy),
                         format_percent(m.macro_precision), format_percent(m.macro_f1),
                         format_percent(m.macro_recall)))
        widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
        lines.append(f"Layer {layer}")
        lines.append("  ".join(h.ljust(w) if i == 0 else h.rjust(w)
                               for i, (h, w) in enumerate(zip(headers, widths))))
        for r in rows:
            lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                                   for i, (c, w) in enumerate(zip(r, widths))))
        lines.append("")
    return "\n".join(lines)


def render_report(report, fmt="table"):
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt == "table":
        return render_table(report)
    raise DomainError(f"unknown report format {fmt!r}")
