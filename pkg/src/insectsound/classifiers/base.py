"""Shared training surface for the five classifier variants.

Every trained model carries an ordered class registry (the sorted unique
labels seen at fit time), a feature width, and a uniform
predict / predict_batch / feature_importance surface. Tie-breaking is fixed
everywhere: earlier-registry class wins votes, lower feature index wins
equal split gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_split: int = 2


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    features_per_split: int | None = None  # defaults to ceil(sqrt(d))
    bootstrap: bool = True
    max_depth: int | None = None
    min_samples_split: int = 2


@dataclass(frozen=True)
class KnnParams:
    k: int = 5


@dataclass(frozen=True)
class SvmParams:
    C: float = 1.0
    gamma: float | None = None  # defaults to 1 / (d * feature variance)
    tol: float = 1e-3
    max_passes: int = 2000  # full sweeps before giving up


@dataclass(frozen=True)
class GbtParams:
    rounds: int = 100
    depth: int = 6
    learning_rate: float = 0.3
    reg_lambda: float = 1.0


def encode_labels(labels) -> tuple[list, np.ndarray]:
    """Class registry (sorted unique labels) and per-row integer codes."""
    labels = list(labels)
    if not labels:
        raise ValueError("cannot train on an empty dataset")
    registry = sorted(set(labels))
    code = {label: i for i, label in enumerate(registry)}
    return registry, np.asarray([code[l] for l in labels], dtype=np.intp)


class TrainedModel:
    """Base for all classifier variants."""

    variant = "base"

    def __init__(self, classes, feature_width: int):
        if not classes:
            raise ValueError("class registry must be non-empty")
        if len(set(classes)) != len(classes):
            raise ValueError("class registry may not contain duplicates")
        self.classes = list(classes)
        self.feature_width = int(feature_width)

    def _check_matrix(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_width:
            raise ValueError(
                f"expected feature width {self.feature_width}, got {X.shape[1]}"
            )
        return X

    def _predict_codes(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, x):
        """Predicted class label for a single feature vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("predict takes a single feature vector; use predict_batch")
        codes = self._predict_codes(self._check_matrix(x))
        return self.classes[int(codes[0])]

    def predict_batch(self, data):
        """Predicted labels for a Dataset or a feature matrix, row by row."""
        X = getattr(data, "features", data)
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] == 0:
            return []
        codes = self._predict_codes(self._check_matrix(X))
        return [self.classes[int(c)] for c in codes]

    def feature_importance(self) -> np.ndarray:
        raise ValueError(
            f"feature importance is unsupported for {self.variant}; "
            "rank features with a tree-based model instead"
        )

    def _payload(self) -> dict:
        raise NotImplementedError


def majority_code(codes: np.ndarray, n_classes: int) -> int:
    """Most frequent code; ties go to the lower code (earlier registry)."""
    counts = np.bincount(codes, minlength=n_classes)
    return int(np.argmax(counts))
