"""Stacked tree ensembles for resting-position classification from
physiological features (EGG, heart rate, respiration rate, SpO2)."""

from .boost import BoostConfig, BoostedModel, fit_boost, predict_boost, predict_proba
from .dataset import (CorrelationMatrix, Dataset, FeatureSchema, ScalerParams, SynthParams,
                      apply_scaler, correlation_matrix, fit_scaler, generate, load_csv, split)
from .forest import Forest, ForestConfig, fit_forest, majority_vote, predict_forest
from .metrics import MetricSet, MetricsReport, confusion_matrix, metric_set, render_report
from .modelfile import load_model, save_model
from .stack import (LayeredPredictions, StackConfig, StackedModel, evaluate_stack, fit_stack,
                    predict_stack)
from .tree import DecisionTree, TreeConfig, best_split, fit_tree, gini, predict_tree

__all__ = [
    "apply_scaler", "best_split", "BoostConfig", "BoostedModel", "confusion_matrix",
    "correlation_matrix", "CorrelationMatrix", "Dataset", "DecisionTree", "evaluate_stack",
    "FeatureSchema", "fit_boost", "fit_forest", "fit_scaler", "fit_stack", "fit_tree", "Forest",
    "ForestConfig", "generate", "gini", "LayeredPredictions", "load_csv", "load_model",
    "majority_vote", "metric_set", "MetricSet", "MetricsReport", "predict_boost",
    "predict_forest", "predict_proba", "predict_stack", "predict_tree", "render_report",
    "save_model", "ScalerParams", "split", "StackConfig", "StackedModel", "SynthParams",
    "TreeConfig",
]

__version__ = "0.1.0"
