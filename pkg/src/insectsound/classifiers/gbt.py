"""Gradient-boosted trees with a multiclass softmax objective.

Each round fits one regression tree per class to the softmax gradients;
leaf values are Newton steps -G/(H + lambda) with lambda=1. Splits maximize
the second-order gain and importances accumulate total gain per feature.
Training loss (multiclass log-loss) is recorded per round and boosting
stops early rather than let it increase.
"""

from __future__ import annotations

import logging

import numpy as np

from .base import GbtParams, TrainedModel, encode_labels

log = logging.getLogger(__name__)

_LEAF = -1


def _softmax(F: np.ndarray) -> np.ndarray:
    z = F - F.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_loss(F: np.ndarray, y_codes: np.ndarray) -> float:
    z = F - F.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(y_codes)), y_codes]))


def best_gain_split(X, g, h, reg_lambda, feature_indices):
    """Best (feature, threshold, gain) by the second-order split criterion."""
    n = len(g)
    G, H = g.sum(), h.sum()
    parent_score = G * G / (H + reg_lambda)
    best = None
    for f in feature_indices:
        order = np.argsort(X[:, f], kind="stable")
        xv = X[order, f]
        if xv[0] == xv[-1]:
            continue
        gl = np.cumsum(g[order])[:-1]
        hl = np.cumsum(h[order])[:-1]
        gr = G - gl
        hr = H - hl
        gain = 0.5 * (
            gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent_score
        )
        gain[xv[1:] == xv[:-1]] = -np.inf
        i = int(np.argmax(gain))
        if gain[i] > 0 and (best is None or gain[i] > best[2]):
            best = (int(f), (xv[i] + xv[i + 1]) / 2.0, float(gain[i]))
    return best


class _RegTreeBuilder:
    def __init__(self, X, g, h, params: GbtParams):
        self.X = X
        self.g = g
        self.h = h
        self.params = params
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.gain_by_feature = np.zeros(X.shape[1])

    def _new_node(self):
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.value.append(0.0)
        return len(self.feature) - 1

    def build(self, idx, depth):
        node = self._new_node()
        split = None
        if depth < self.params.depth and len(idx) >= 2:
            split = best_gain_split(
                self.X[idx], self.g[idx], self.h[idx],
                self.params.reg_lambda, range(self.X.shape[1]),
            )
        if split is None:
            G, H = self.g[idx].sum(), self.h[idx].sum()
            self.value[node] = -G / (H + self.params.reg_lambda)
            return node
        f, thr, gain = split
        self.feature[node] = f
        self.threshold[node] = thr
        self.gain_by_feature[f] += gain
        go_left = self.X[idx, f] <= thr
        self.left[node] = self.build(idx[go_left], depth + 1)
        self.right[node] = self.build(idx[~go_left], depth + 1)
        return node

    def arrays(self):
        return {
            "feature": np.asarray(self.feature, dtype=np.intp),
            "threshold": np.asarray(self.threshold, dtype=np.float64),
            "left": np.asarray(self.left, dtype=np.intp),
            "right": np.asarray(self.right, dtype=np.intp),
            "value": np.asarray(self.value, dtype=np.float64),
        }


def _predict_reg_tree(tree: dict, X: np.ndarray) -> np.ndarray:
    feature, threshold = tree["feature"], tree["threshold"]
    left, right, value = tree["left"], tree["right"], tree["value"]
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feature[node] != _LEAF:
            node = left[node] if X[r, feature[node]] <= threshold[node] else right[node]
        out[r] = value[node]
    return out


class GradientBoostedModel(TrainedModel):
    variant = "gradient_boosted"

    def __init__(self, classes, feature_width, params: GbtParams, rounds: list,
                 staged_log_loss: list, gain_by_feature: np.ndarray, seed):
        super().__init__(classes, feature_width)
        self.params = params
        self.rounds = rounds  # list of per-class tree dicts
        self.staged_log_loss = staged_log_loss
        self.gain_by_feature = np.asarray(gain_by_feature, dtype=np.float64)
        self.seed = seed

    @classmethod
    def fit(cls, X, labels, params: GbtParams | None = None, seed: int = 0):
        params = params or GbtParams()
        if params.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if params.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("training data must be a non-empty 2-D matrix")
        classes, y = encode_labels(labels)
        if len(classes) < 2:
            raise ValueError("gradient boosting requires at least two classes")
        n, d = X.shape
        C = len(classes)
        onehot = np.zeros((n, C))
        onehot[np.arange(n), y] = 1.0

        F = np.zeros((n, C))
        losses = [_log_loss(F, y)]
        rounds = []
        gain_by_feature = np.zeros(d)
        for _ in range(params.rounds):
            P = _softmax(F)
            F_new = F.copy()
            round_trees = []
            round_gain = np.zeros(d)
            for c in range(C):
                g = P[:, c] - onehot[:, c]
                h = P[:, c] * (1.0 - P[:, c])
                builder = _RegTreeBuilder(X, g, h, params)
                builder.build(np.arange(n), depth=0)
                tree = builder.arrays()
                round_trees.append(tree)
                round_gain += builder.gain_by_feature
                F_new[:, c] += params.learning_rate * _predict_reg_tree(tree, X)
            new_loss = _log_loss(F_new, y)
            if new_loss > losses[-1]:
                log.warning(
                    "boosting stopped after %d rounds: training log-loss would rise "
                    "from %.6g to %.6g", len(rounds), losses[-1], new_loss,
                )
                break
            F = F_new
            losses.append(new_loss)
            rounds.append(round_trees)
            gain_by_feature += round_gain
        return cls(classes, d, params, rounds, losses, gain_by_feature, seed)

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        F = np.zeros((X.shape[0], len(self.classes)))
        for round_trees in self.rounds:
            for c, tree in enumerate(round_trees):
                F[:, c] += self.params.learning_rate * _predict_reg_tree(tree, X)
        return F

    def _predict_codes(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_scores(X), axis=1)

    def feature_importance(self) -> np.ndarray:
        total = self.gain_by_feature.sum()
        if total <= 0:
            raise ValueError("boosted model has no splits; importances are undefined")
        return self.gain_by_feature / total

    def _payload(self) -> dict:
        return {
            "params": {
                "rounds": self.params.rounds,
                "depth": self.params.depth,
                "learning_rate": self.params.learning_rate,
                "reg_lambda": self.params.reg_lambda,
            },
            "seed": self.seed,
            "staged_log_loss": list(self.staged_log_loss),
            "gain_by_feature": self.gain_by_feature.tolist(),
            "rounds": [
                [{k: v.tolist() for k, v in tree.items()} for tree in round_trees]
                for round_trees in self.rounds
            ],
        }

    @classmethod
    def _from_payload(cls, payload, classes, feature_width):
        rounds = [
            [
                {
                    k: np.asarray(v, dtype=np.float64 if k in ("threshold", "value") else np.intp)
                    for k, v in tree.items()
                }
                for tree in round_trees
            ]
            for round_trees in payload["rounds"]
        ]
        return cls(
            classes,
            feature_width,
            GbtParams(**payload["params"]),
            rounds,
            list(payload["staged_log_loss"]),
            np.asarray(payload["gain_by_feature"], dtype=np.float64),
            payload["seed"],
        )
