"""CART decision tree with Gini impurity splits.

Thresholds are midpoints between consecutive distinct sorted feature values;
splits require a strictly positive impurity decrease. Tie-breaking is
deterministic: equal decreases keep the lower feature index, and within one
feature the lowest qualifying threshold. Importances are the total
node-weighted impurity decrease per feature, normalized to sum 1.
"""

from __future__ import annotations

import numpy as np

from .base import TrainedModel, TreeParams, encode_labels

_LEAF = -1


def gini(counts: np.ndarray) -> float:
    """Gini impurity 1 - sum(p^2) of a class-count vector."""
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p * p).sum())


def best_gini_split(X, y_codes, n_classes, feature_indices):
    """Best (feature, threshold, impurity_decrease) over the given features.

    Returns None when no split yields a positive decrease. Feature indices
    are scanned in the given order; a strictly larger decrease is required
    to displace the incumbent, so earlier features win ties.
    """
    n = len(y_codes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_codes] = 1.0
    total = onehot.sum(axis=0)
    parent = gini(total)
    if parent == 0.0:
        return None

    best = None
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    for f in feature_indices:
        xv_order = np.argsort(X[:, f], kind="stable")
        xv = X[xv_order, f]
        if xv[0] == xv[-1]:
            continue
        cum = np.cumsum(onehot[xv_order], axis=0)[:-1]  # left counts per cut
        gl = 1.0 - ((cum / nl[:, None]) ** 2).sum(axis=1)
        gr = 1.0 - (((total - cum) / nr[:, None]) ** 2).sum(axis=1)
        weighted = (nl * gl + nr * gr) / n
        weighted[xv[1:] == xv[:-1]] = np.inf  # only cut between distinct values
        i = int(np.argmin(weighted))
        decrease = parent - weighted[i]
        if decrease > 0 and (best is None or decrease > best[2]):
            best = (int(f), (xv[i] + xv[i + 1]) / 2.0, float(decrease))
    return best


class _ClassTreeBuilder:
    """Recursive CART construction over flat node arrays."""

    def __init__(self, X, y_codes, n_classes, params: TreeParams, rng=None, features_per_split=None):
        self.X = X
        self.y = y_codes
        self.n_classes = n_classes
        self.params = params
        self.rng = rng
        self.features_per_split = features_per_split
        self.n_total = len(y_codes)
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.leaf_class = []
        self.importance = np.zeros(X.shape[1])

    def _candidate_features(self):
        d = self.X.shape[1]
        if self.features_per_split is None or self.features_per_split >= d:
            return np.arange(d)
        chosen = self.rng.choice(d, size=self.features_per_split, replace=False)
        return np.sort(chosen)

    def _new_node(self):
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.leaf_class.append(_LEAF)
        return len(self.feature) - 1

    def build(self, idx: np.ndarray, depth: int) -> int:
        node = self._new_node()
        y = self.y[idx]
        counts = np.bincount(y, minlength=self.n_classes)

        depth_capped = self.params.max_depth is not None and depth >= self.params.max_depth
        split = None
        if not depth_capped and len(idx) >= self.params.min_samples_split:
            split = best_gini_split(self.X[idx], y, self.n_classes, self._candidate_features())
        if split is None:
            self.leaf_class[node] = int(np.argmax(counts))
            return node

        f, thr, decrease = split
        self.feature[node] = f
        self.threshold[node] = thr
        self.importance[f] += (len(idx) / self.n_total) * decrease
        go_left = self.X[idx, f] <= thr
        self.left[node] = self.build(idx[go_left], depth + 1)
        self.right[node] = self.build(idx[~go_left], depth + 1)
        return node


def predict_tree_codes(nodes: dict, X: np.ndarray) -> np.ndarray:
    """Walk every row of X through flat node arrays to its leaf class code."""
    feature = nodes["feature"]
    threshold = nodes["threshold"]
    left = nodes["left"]
    right = nodes["right"]
    leaf_class = nodes["leaf_class"]
    out = np.empty(X.shape[0], dtype=np.intp)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] != _LEAF:
            node = left[node] if X[r, feature[node]] <= threshold[node] else right[node]
        out[r] = leaf_class[node]
    return out


class DecisionTreeModel(TrainedModel):
    variant = "decision_tree"

    def __init__(self, classes, feature_width, params: TreeParams, nodes: dict, importance: np.ndarray):
        super().__init__(classes, feature_width)
        self.params = params
        self.nodes = nodes
        self._importance = np.asarray(importance, dtype=np.float64)

    @classmethod
    def fit(cls, X, labels, params: TreeParams | None = None, *, rng=None, features_per_split=None):
        params = params or TreeParams()
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("training data must be a non-empty 2-D matrix")
        classes, y = encode_labels(labels)
        builder = _ClassTreeBuilder(
            X, y, len(classes), params, rng=rng, features_per_split=features_per_split
        )
        builder.build(np.arange(len(y)), depth=0)
        nodes = {
            "feature": np.asarray(builder.feature, dtype=np.intp),
            "threshold": np.asarray(builder.threshold, dtype=np.float64),
            "left": np.asarray(builder.left, dtype=np.intp),
            "right": np.asarray(builder.right, dtype=np.intp),
            "leaf_class": np.asarray(builder.leaf_class, dtype=np.intp),
        }
        return cls(classes, X.shape[1], params, nodes, builder.importance)

    @property
    def n_splits(self) -> int:
        return int((self.nodes["feature"] != _LEAF).sum())

    def _predict_codes(self, X: np.ndarray) -> np.ndarray:
        return predict_tree_codes(self.nodes, X)

    def feature_importance(self) -> np.ndarray:
        total = self._importance.sum()
        if total <= 0:
            raise ValueError("tree has no splits; importances are undefined")
        return self._importance / total

    def _payload(self) -> dict:
        return {
            "params": {"max_depth": self.params.max_depth,
                       "min_samples_split": self.params.min_samples_split},
            "nodes": {k: v.tolist() for k, v in self.nodes.items()},
            "importance": self._importance.tolist(),
        }

    @classmethod
    def _from_payload(cls, payload, classes, feature_width):
        nodes = {
            k: np.asarray(v, dtype=np.float64 if k == "threshold" else np.intp)
            for k, v in payload["nodes"].items()
        }
        params = TreeParams(**payload["params"])
        return cls(classes, feature_width, params, nodes, np.asarray(payload["importance"]))
