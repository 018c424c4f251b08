"""RBF-kernel SVM trained by sequential minimal optimization.

Multiclass is one-vs-one: each class pair gets its own binary SVM, and
prediction tallies pairwise votes (ties to the earlier-registry class).
A binary problem is solved by SMO working-pair steps until a full sweep
finds no Karush-Kuhn-Tucker violation beyond tol; dual coefficients stay
inside [0, C] by construction.
"""

from __future__ import annotations

import logging
from itertools import combinations

import numpy as np

from .base import SvmParams, TrainedModel, encode_labels

log = logging.getLogger(__name__)

_MIN_STEP = 1e-9


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """K[i, j] = exp(-gamma * ||A_i - B_j||^2)."""
    d2 = (
        (A * A).sum(axis=1)[:, None]
        + (B * B).sum(axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    return np.exp(-gamma * np.maximum(d2, 0.0))


class _SmoResult:
    def __init__(self, alphas, b, converged, sweeps, max_violation):
        self.alphas = alphas
        self.b = b
        self.converged = converged
        self.sweeps = sweeps
        self.max_violation = max_violation


def _smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_passes: int, rng) -> _SmoResult:
    """Maximize the dual on one binary problem (y in {-1, +1})."""
    n = len(y)
    alphas = np.zeros(n)
    b = 0.0
    E = -y.astype(np.float64)  # f(x) - y with all alphas zero

    def violates(i):
        r = y[i] * E[i]  # = y_i * f(x_i) - 1
        return (r < -tol and alphas[i] < C) or (r > tol and alphas[i] > 0)

    def _snap(a):
        # keep multipliers exactly on their bounds; dust there creates
        # phantom KKT violations no step can fix
        if a < _MIN_STEP:
            return 0.0
        if a > C - _MIN_STEP:
            return C
        return a

    def take_step(i1, i2):
        """Jointly optimize (alphas[i1], alphas[i2]); i2 is the violator."""
        nonlocal b, E
        if i1 == i2:
            return False
        a1, a2 = alphas[i1], alphas[i2]
        y1, y2 = y[i1], y[i2]
        if y1 != y2:
            L, H = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            L, H = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        if L >= H:
            return False
        eta = 2.0 * K[i1, i2] - K[i1, i1] - K[i2, i2]
        if eta >= 0:
            return False
        a2_new = _snap(min(max(a2 - y2 * (E[i1] - E[i2]) / eta, L), H))
        if abs(a2_new - a2) < _MIN_STEP:
            return False
        a1_new = _snap(a1 + y1 * y2 * (a2 - a2_new))

        b1 = b - E[i1] - y1 * (a1_new - a1) * K[i1, i1] - y2 * (a2_new - a2) * K[i1, i2]
        b2 = b - E[i2] - y1 * (a1_new - a1) * K[i1, i2] - y2 * (a2_new - a2) * K[i2, i2]
        if 0.0 < a1_new < C:
            b_new = b1
        elif 0.0 < a2_new < C:
            b_new = b2
        else:
            b_new = (b1 + b2) / 2.0

        E += (
            y1 * (a1_new - a1) * K[:, i1]
            + y2 * (a2_new - a2) * K[:, i2]
            + (b_new - b)
        )
        alphas[i1], alphas[i2] = a1_new, a2_new
        b = b_new
        return True

    fallback_order = rng.permutation(n)
    sweeps = 0
    converged = False
    while sweeps < max_passes:
        sweeps += 1
        n_violations = 0
        n_changed = 0
        for i in range(n):
            if not violates(i):
                continue
            n_violations += 1
            # second-choice heuristic, then every other index until progress
            j_best = int(np.argmax(np.abs(E - E[i])))
            if take_step(j_best, i):
                n_changed += 1
                continue
            for j in fallback_order:
                if j != j_best and take_step(int(j), i):
                    n_changed += 1
                    break
        if n_violations == 0:
            converged = True
            break
        if n_changed == 0:
            break  # violations remain but no pair makes progress

    f = (alphas * y) @ K + b
    margins = y * f
    v_low = np.where(alphas < C, np.maximum(0.0, 1.0 - margins), 0.0)
    v_high = np.where(alphas > 0, np.maximum(0.0, margins - 1.0), 0.0)
    max_violation = float(np.maximum(v_low, v_high).max()) if n else 0.0
    return _SmoResult(alphas, b, converged, sweeps, max_violation)


class SvmRbfModel(TrainedModel):
    variant = "svm_rbf"

    def __init__(self, classes, feature_width, params: SvmParams, gamma: float, pairs: list, seed):
        super().__init__(classes, feature_width)
        self.params = params
        self.gamma = gamma
        self.pairs = pairs
        self.seed = seed

    @classmethod
    def fit(cls, X, labels, params: SvmParams | None = None, seed: int = 0):
        params = params or SvmParams()
        if params.C <= 0:
            raise ValueError("C must be positive")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("training data must be a non-empty 2-D matrix")
        classes, y_codes = encode_labels(labels)
        if len(classes) < 2:
            raise ValueError("SVM training requires at least two classes")
        gamma = params.gamma
        if gamma is None:
            var = float(X.var())
            gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        if gamma <= 0:
            raise ValueError("gamma must be positive")

        seeds = np.random.SeedSequence(seed).spawn(len(classes) * (len(classes) - 1) // 2)
        pairs = []
        for pair_idx, (a, b_cls) in enumerate(combinations(range(len(classes)), 2)):
            rows = np.flatnonzero((y_codes == a) | (y_codes == b_cls))
            Xp = X[rows]
            yp = np.where(y_codes[rows] == a, 1.0, -1.0)
            K = rbf_kernel(Xp, Xp, gamma)
            rng = np.random.default_rng(seeds[pair_idx])
            res = _smo_solve(K, yp, params.C, params.tol, params.max_passes, rng)
            if not res.converged:
                log.warning(
                    "SMO pair (%s, %s) did not converge after %d sweeps "
                    "(max KKT violation %.3g); keeping best-so-far",
                    classes[a], classes[b_cls], res.sweeps, res.max_violation,
                )
            support = np.flatnonzero(res.alphas > 0)
            pairs.append(
                {
                    "first": a,
                    "second": b_cls,
                    "sv": Xp[support],
                    "alphas": res.alphas[support],
                    "coef": res.alphas[support] * yp[support],
                    "b": res.b,
                    "converged": res.converged,
                    "max_kkt_violation": res.max_violation,
                }
            )
        return cls(classes, X.shape[1], params, gamma, pairs, seed)

    @property
    def converged(self) -> bool:
        return all(p["converged"] for p in self.pairs)

    @property
    def max_kkt_violation(self) -> float:
        return max(p["max_kkt_violation"] for p in self.pairs)

    def decision_function(self, X: np.ndarray, pair: dict) -> np.ndarray:
        if len(pair["sv"]) == 0:
            return np.full(X.shape[0], pair["b"])
        return pair["coef"] @ rbf_kernel(pair["sv"], X, self.gamma) + pair["b"]

    def _predict_codes(self, X: np.ndarray) -> np.ndarray:
        votes = np.zeros((X.shape[0], len(self.classes)), dtype=np.intp)
        for pair in self.pairs:
            f = self.decision_function(X, pair)
            votes[f >= 0, pair["first"]] += 1
            votes[f < 0, pair["second"]] += 1
        return np.argmax(votes, axis=1)

    def _payload(self) -> dict:
        return {
            "params": {
                "C": self.params.C,
                "gamma": self.params.gamma,
                "tol": self.params.tol,
                "max_passes": self.params.max_passes,
            },
            "gamma": self.gamma,
            "seed": self.seed,
            "pairs": [
                {
                    "first": p["first"],
                    "second": p["second"],
                    "sv": p["sv"].tolist(),
                    "alphas": p["alphas"].tolist(),
                    "coef": p["coef"].tolist(),
                    "b": p["b"],
                    "converged": p["converged"],
                    "max_kkt_violation": p["max_kkt_violation"],
                }
                for p in self.pairs
            ],
        }

    @classmethod
    def _from_payload(cls, payload, classes, feature_width):
        pairs = []
        for p in payload["pairs"]:
            pairs.append(
                {
                    "first": p["first"],
                    "second": p["second"],
                    "sv": np.asarray(p["sv"], dtype=np.float64).reshape(-1, feature_width),
                    "alphas": np.asarray(p["alphas"], dtype=np.float64),
                    "coef": np.asarray(p["coef"], dtype=np.float64),
                    "b": p["b"],
                    "converged": p["converged"],
                    "max_kkt_violation": p["max_kkt_violation"],
                }
            )
        return cls(
            classes,
            feature_width,
            SvmParams(**payload["params"]),
            payload["gamma"],
            pairs,
            payload["seed"],
        )
