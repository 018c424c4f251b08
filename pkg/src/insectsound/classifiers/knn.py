"""k-nearest-neighbor classifier with Euclidean distance.

Distance ties resolve to the lower training-row index; vote ties resolve to
the class earlier in the registry.
"""

from __future__ import annotations

import numpy as np

from .base import KnnParams, TrainedModel, encode_labels


class KnnModel(TrainedModel):
    variant = "knn"

    def __init__(self, classes, feature_width, params: KnnParams, X, y_codes):
        super().__init__(classes, feature_width)
        self.params = params
        self.X = np.asarray(X, dtype=np.float64)
        self.y_codes = np.asarray(y_codes, dtype=np.intp)

    @classmethod
    def fit(cls, X, labels, params: KnnParams | None = None):
        params = params or KnnParams()
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("training data must be a non-empty 2-D matrix")
        if params.k < 1:
            raise ValueError(f"k must be at least 1, got {params.k}")
        if params.k > X.shape[0]:
            raise ValueError(f"k={params.k} exceeds the {X.shape[0]} training rows")
        classes, y = encode_labels(labels)
        return cls(classes, X.shape[1], params, X, y)

    def _predict_codes(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.intp)
        for r in range(X.shape[0]):
            diff = self.X - X[r]
            dist2 = np.einsum("ij,ij->i", diff, diff)
            nearest = np.argsort(dist2, kind="stable")[: self.params.k]
            counts = np.bincount(self.y_codes[nearest], minlength=len(self.classes))
            out[r] = np.argmax(counts)
        return out

    def _payload(self) -> dict:
        return {
            "params": {"k": self.params.k},
            "X": self.X.tolist(),
            "y_codes": self.y_codes.tolist(),
        }

    @classmethod
    def _from_payload(cls, payload, classes, feature_width):
        return cls(
            classes,
            feature_width,
            KnnParams(**payload["params"]),
            np.asarray(payload["X"], dtype=np.float64).reshape(-1, feature_width),
            np.asarray(payload["y_codes"], dtype=np.intp),
        )
