"""Five classifiers with a uniform train / predict / importance surface.

The dataset-level entry points are the train_* functions below; each takes
a features.Dataset and returns a TrainedModel. The model classes can also
be fit directly on (matrix, labels) pairs.
"""

from __future__ import annotations

from .base import (
    ForestParams,
    GbtParams,
    KnnParams,
    SvmParams,
    TrainedModel,
    TreeParams,
)
from .cart import DecisionTreeModel
from .forest import RandomForestModel
from .gbt import GradientBoostedModel
from .knn import KnnModel
from .svm import SvmRbfModel
from .serialize import load_model, model_from_document, model_to_document, save_model

MODEL_VARIANTS = ("decision_tree", "random_forest", "knn", "svm_rbf", "gradient_boosted")


def train_decision_tree(train, params: TreeParams | None = None) -> DecisionTreeModel:
    return DecisionTreeModel.fit(train.features, train.labels, params)


def train_random_forest(train, params: ForestParams | None = None, seed: int = 0) -> RandomForestModel:
    return RandomForestModel.fit(train.features, train.labels, params, seed=seed)


def train_knn(train, params: KnnParams | None = None) -> KnnModel:
    return KnnModel.fit(train.features, train.labels, params)


def train_svm_rbf(train, params: SvmParams | None = None, seed: int = 0) -> SvmRbfModel:
    return SvmRbfModel.fit(train.features, train.labels, params, seed=seed)


def train_gbt(train, params: GbtParams | None = None, seed: int = 0) -> GradientBoostedModel:
    return GradientBoostedModel.fit(train.features, train.labels, params, seed=seed)


def train_model(variant: str, train, seed: int = 0, params=None) -> TrainedModel:
    """Train any variant by name (used by the evaluation grid and CLI)."""
    if variant == "decision_tree":
        return train_decision_tree(train, params)
    if variant == "random_forest":
        return train_random_forest(train, params, seed=seed)
    if variant == "knn":
        return train_knn(train, params)
    if variant == "svm_rbf":
        return train_svm_rbf(train, params, seed=seed)
    if variant == "gradient_boosted":
        return train_gbt(train, params, seed=seed)
    raise ValueError(f"unknown model variant {variant!r} (expected one of {MODEL_VARIANTS})")


def predict(model: TrainedModel, x):
    """Label for one feature vector (width-checked)."""
    return model.predict(x)


def predict_batch(model: TrainedModel, data):
    """Labels for a Dataset or feature matrix, row by row."""
    return model.predict_batch(data)


def feature_importance(model: TrainedModel):
    """Normalized importance vector; raises for knn and svm_rbf."""
    return model.feature_importance()
