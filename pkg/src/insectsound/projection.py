"""Exact t-SNE projection to 2-D for cluster diagnostics.

Pairwise affinities use per-point Gaussian bandwidths found by bisection so
each conditional distribution's entropy matches log(perplexity); the
symmetrized matrix sums to 1. The embedding minimizes KL(P || Q) with a
Student-t kernel by momentum gradient descent (early exaggeration 12x for
the first 250 iterations, momentum 0.5 then 0.8). O(N^2) throughout; meant
for at most a few thousand points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class TsneParams:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_switch_iter: int = 250
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.perplexity < 1:
            raise ValueError("perplexity must be at least 1")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")


def _squared_distances(X: np.ndarray) -> np.ndarray:
    s = (X * X).sum(axis=1)
    d2 = s[:, None] + s[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _row_affinities(d2_row: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Entropy (nats) and conditional probabilities for one precision value."""
    p = np.exp(-d2_row * beta)
    total = p.sum()
    if total <= 0:
        return 0.0, p
    h = np.log(total) + beta * float((d2_row * p).sum()) / total
    return h, p / total

def _conditional_affinities(X: np.ndarray, perplexity: float,
                            entropy_tol: float = 1e-5) -> np.ndarray:
    """Per-row conditional distributions p_j|i with entropy log(perplexity)."""
    n = X.shape[0]
    if n < 3:
        raise ValueError("t-SNE affinities need at least 3 points")
    if not perplexity < n:
        raise ValueError(f"perplexity ({perplexity}) must be below the point count ({n})")
    d2 = _squared_distances(X)
    target = np.log(perplexity)
    P = np.zeros((n, n))
    others = np.arange(n)
    for i in range(n):
        mask = others != i
        row = d2[i, mask]
        beta, beta_min, beta_max = 1.0, 0.0, np.inf
        h, p = _row_affinities(row, beta)
        for _ in range(200):
            if abs(h - target) <= entropy_tol:
                break
            if h > target:  # too flat: raise precision
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = (beta + beta_min) / 2.0
            h, p = _row_affinities(row, beta)
        if abs(h - target) > entropy_tol:
            raise ValueError(
                f"bandwidth search failed for point {i} (entropy {h:.6f} vs "
                f"target {target:.6f}); points may be all-identical"
            )
        P[i, mask] = p
    return P


def perplexity_affinities(features: np.ndarray, perplexity: float,
                          entropy_tol: float = 1e-5) -> np.ndarray:
    """Symmetric affinity matrix P with row entropies matched to log(perplexity)."""
    X = np.asarray(features, dtype=np.float64)
    P = _conditional_affinities(X, perplexity, entropy_tol)
    n = X.shape[0]
    return (P + P.T) / (2.0 * n)


def _kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0
    return float((P[mask] * np.log(P[mask] / np.maximum(Q[mask], _EPS))).sum())


def tsne(features: np.ndarray, params: TsneParams | None = None) -> tuple[np.ndarray, list[float]]:
    """Embed rows of `features` into 2-D; returns (coords, per-iteration KL)."""
    params = params or TsneParams()
    X = np.asarray(features, dtype=np.float64)
    n = X.shape[0]
    P = perplexity_affinities(X, params.perplexity)

    rng = np.random.default_rng(np.random.SeedSequence([int(params.seed)]))
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(Y)
    kl_trace = []

    for it in range(params.iterations):
        P_eff = P * params.early_exaggeration if it < params.exaggeration_iters else P
        momentum = (
            params.initial_momentum if it < params.momentum_switch_iter else params.final_momentum
        )

        d2 = _squared_distances(Y)
        num = 1.0 / (1.0 + d2)
        np.fill_diagonal(num, 0.0)
        Q = num / num.sum()

        W = (P_eff - Q) * num
        grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)

        update = momentum * update - params.learning_rate * grad
        Y = Y + update
        if not np.isfinite(Y).all():
            raise FloatingPointError(
                f"t-SNE diverged at iteration {it}; lower the learning rate"
            )
        kl_trace.append(_kl_divergence(P, np.maximum(Q, _EPS)))
    return Y, kl_trace


def embedding_report(coords: np.ndarray, labels, clip_ids, group_by: str = "class"):
    """Rows (x, y, class, clip_id) for external plotting, ordered by group.

    group_by 'class' orders rows by class label; 'clip' orders by
    (class, clip_id). Row content is identical either way.
    """
    coords = np.asarray(coords, dtype=np.float64)
    labels, clip_ids = list(labels), list(clip_ids)
    if coords.shape[0] == 0:
        raise ValueError("embedding_report requires at least one point")
    if not (coords.shape[0] == len(labels) == len(clip_ids)):
        raise ValueError("coords, labels, and clip_ids must have equal lengths")
    if group_by == "class":
        order = sorted(range(len(labels)), key=lambda r: (labels[r], r))
    elif group_by == "clip":
        order = sorted(range(len(labels)), key=lambda r: (labels[r], clip_ids[r], r))
    else:
        raise ValueError(f"unknown grouping {group_by!r} (expected 'class' or 'clip')")
    return [
        (float(coords[r, 0]), float(coords[r, 1]), labels[r], clip_ids[r]) for r in order
    ]


def write_embedding_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y", "class", "clip_id"])
        for x, y, label, clip_id in rows:
            writer.writerow([repr(x), repr(y), label, clip_id])
