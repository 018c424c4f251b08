"""Random forest: bagged CART trees with per-node feature subsampling."""

from __future__ import annotations

import math

import numpy as np

from .base import ForestParams, TrainedModel, TreeParams, encode_labels
from .cart import DecisionTreeModel, predict_tree_codes


class RandomForestModel(TrainedModel):
    variant = "random_forest"

    def __init__(self, classes, feature_width, params: ForestParams, trees: list, seed):
        super().__init__(classes, feature_width)
        self.params = params
        self.trees = trees  # list of DecisionTreeModel
        self.seed = seed

    @classmethod
    def fit(cls, X, labels, params: ForestParams | None = None, seed: int = 0):
        params = params or ForestParams()
        if params.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("training data must be a non-empty 2-D matrix")
        classes, y = encode_labels(labels)
        n, d = X.shape
        m = params.features_per_split
        if m is None:
            m = math.ceil(math.sqrt(d))
        m = min(m, d)
        tree_params = TreeParams(max_depth=params.max_depth,
                                 min_samples_split=params.min_samples_split)

        labels_arr = np.asarray(list(labels), dtype=object)
        seeds = np.random.SeedSequence(seed).spawn(params.n_trees)
        trees = []
        for t in range(params.n_trees):
            rng = np.random.default_rng(seeds[t])
            if params.bootstrap:
                idx = rng.integers(0, n, size=n)
            else:
                idx = np.arange(n)
            tree = DecisionTreeModel.fit(
                X[idx], labels_arr[idx].tolist(), tree_params,
                rng=rng, features_per_split=m,
            )
            trees.append(tree)
        return cls(classes, d, params, trees, seed)

    def _predict_codes(self, X: np.ndarray) -> np.ndarray:
        # member trees can miss classes under bootstrap; map their votes
        # back into this forest's registry before counting
        votes = np.zeros((X.shape[0], len(self.classes)), dtype=np.intp)
        for tree in self.trees:
            remap = np.asarray([self.classes.index(c) for c in tree.classes], dtype=np.intp)
            codes = remap[predict_tree_codes(tree.nodes, X)]
            votes[np.arange(X.shape[0]), codes] += 1
        return np.argmax(votes, axis=1)

    def feature_importance(self) -> np.ndarray:
        per_tree = []
        for tree in self.trees:
            if tree._importance.sum() > 0:
                per_tree.append(tree._importance / tree._importance.sum())
        if not per_tree:
            raise ValueError("forest has no splits; importances are undefined")
        mean = np.mean(per_tree, axis=0)
        return mean / mean.sum()

    def _payload(self) -> dict:
        return {
            "params": {
                "n_trees": self.params.n_trees,
                "features_per_split": self.params.features_per_split,
                "bootstrap": self.params.bootstrap,
                "max_depth": self.params.max_depth,
                "min_samples_split": self.params.min_samples_split,
            },
            "seed": self.seed,
            "trees": [
                {"classes": t.classes, "payload": t._payload()} for t in self.trees
            ],
        }

    @classmethod
    def _from_payload(cls, payload, classes, feature_width):
        params = ForestParams(**payload["params"])
        trees = [
            DecisionTreeModel._from_payload(t["payload"], t["classes"], feature_width)
            for t in payload["trees"]
        ]
        return cls(classes, feature_width, params, trees, payload["seed"])
