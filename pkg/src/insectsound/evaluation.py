"""Leave-one-clip-out and random-split experiments.

The leave-one-clip-out (LOCO) protocol: clip j of every class forms the
test set of fold j and the remaining clips form training. Per fold the
training instances are balanced to i rows per class, optionally augmented
(training only, never test), featurized, ranked by a decision tree trained
on that fold's training matrix, and evaluated per model and top-k cell.

Per-fold randomness derives from the master seed plus the cell coordinates,
so adding models or k values never shifts the sampling of other cells.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .augmentation import get_preset, augment
from .classifiers import MODEL_VARIANTS, train_model
from .classifiers.cart import DecisionTreeModel
from .features import (
    Dataset,
    MfccConfig,
    build_dataset,
    importance_sum,
    rank_features,
    select_top_k,
)

_BALANCE_TAG = 101  # seed-domain tags keep balance and model streams apart
_MODEL_TAG = 202


@dataclass(frozen=True)
class FoldSpec:
    """One LOCO fold: ordinal of the test clip, ordinals of the training clips."""

    test_clip_ordinal: int
    train_clip_ordinals: tuple

    def __post_init__(self):
        if self.test_clip_ordinal in self.train_clip_ordinals:
            raise ValueError("test clip ordinal also appears in the training set")


@dataclass
class ConfusionMatrix:
    """Row = true class, column = predicted class, in registry order."""

    counts: np.ndarray
    registry: list

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        c = len(self.registry)
        if self.counts.shape != (c, c):
            raise ValueError("confusion counts must be square in the registry size")
        if (self.counts < 0).any():
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def make_loco_folds(clips_per_class) -> list[FoldSpec]:
    """Folds for leave-one-clip-out over {class: [clip ordinals]}.

    Every class must hold the same ordinals 1..n with n >= 2. Folds are
    ordered by descending test ordinal (clip n first).
    """
    if not clips_per_class:
        raise ValueError("no classes to fold")
    sets = {label: sorted(ordinals) for label, ordinals in clips_per_class.items()}
    counts = {label: len(o) for label, o in sets.items()}
    if len(set(counts.values())) != 1:
        raise ValueError(f"classes have unequal clip counts: {counts}")
    n = next(iter(counts.values()))
    if n < 2:
        raise ValueError(f"leave-one-clip-out needs at least 2 clips per class, got {n}")
    for label, ordinals in sets.items():
        if ordinals != list(range(1, n + 1)):
            raise ValueError(
                f"class {label} clip ordinals must be contiguous 1..{n}, got {ordinals}"
            )
    all_ordinals = list(range(1, n + 1))
    return [
        FoldSpec(test_clip_ordinal=j, train_clip_ordinals=tuple(o for o in all_ordinals if o != j))
        for j in range(n, 0, -1)
    ]


def balance_indices(class_labels, i: int, rng) -> list[int]:
    """Pick exactly i positions per class uniformly without replacement."""
    if i < 1:
        raise ValueError("balanced instance count must be at least 1")
    by_class: dict = {}
    for pos, label in enumerate(class_labels):
        by_class.setdefault(label, []).append(pos)
    chosen = []
    for label in sorted(by_class):
        pool = by_class[label]
        if len(pool) < i:
            raise ValueError(
                f"class {label} has only {len(pool)} training instances, fewer than i={i}"
            )
        take = rng.choice(len(pool), size=i, replace=False)
        chosen.extend(pool[t] for t in take)
    return sorted(chosen)


def balance(instances, i: int, seed: int) -> list:
    """Balanced subsample of instances: exactly i per class."""
    instances = list(instances)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _BALANCE_TAG]))
    keep = balance_indices([inst.class_label for inst in instances], i, rng)
    return [instances[p] for p in keep]


def make_random_split(dataset: Dataset, test_fraction: float, seed: int):
    """Stratified random split: per class, round(fraction * n) rows go to test."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    by_class: dict = {}
    for pos, label in enumerate(dataset.labels):
        by_class.setdefault(label, []).append(pos)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    train_rows, test_rows = [], []
    for label in sorted(by_class):
        pool = by_class[label]
        if len(pool) < 2:
            raise ValueError(f"class {label} has fewer than 2 rows; cannot split")
        perm = rng.permutation(len(pool))
        n_test = round(test_fraction * len(pool))
        test_rows.extend(pool[p] for p in perm[:n_test])
        train_rows.extend(pool[p] for p in perm[n_test:])
    return dataset.subset(sorted(train_rows)), dataset.subset(sorted(test_rows))


def confusion_matrix(true_labels, predicted_labels, registry) -> ConfusionMatrix:
    true_labels, predicted_labels = list(true_labels), list(predicted_labels)
    if len(true_labels) != len(predicted_labels):
        raise ValueError(
            f"label count mismatch: {len(true_labels)} true vs {len(predicted_labels)} predicted"
        )
    code = {label: k for k, label in enumerate(registry)}
    counts = np.zeros((len(registry), len(registry)), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        if t not in code or p not in code:
            raise ValueError(f"label outside the registry: true={t!r}, predicted={p!r}")
        counts[code[t], code[p]] += 1
    return ConfusionMatrix(counts=counts, registry=list(registry))


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("accuracy of an empty confusion matrix is undefined")
    return float(np.trace(cm.counts)) / cm.total


def _derive_rng(master_seed: int, *parts) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, parts)]))


def _derive_model_seed(master_seed: int, *parts) -> int:
    return int(_derive_rng(master_seed, *parts).integers(0, 2**31 - 1))


@dataclass
class ExperimentReport:
    """Grid of per-cell results plus fold descriptors, averages, and deltas."""

    class_registry: list
    config_echo: dict
    folds: list = field(default_factory=list)
    cells: list = field(default_factory=list)
    arms: list = field(default_factory=list)  # per (i, fold, augmented): ranking etc.
    averages: list = field(default_factory=list)
    deltas: list = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return sum(1 for c in self.cells if c["status"] != "ok")

    def to_document(self) -> dict:
        return {
            "format": "insectsound-report",
            "schema_version": 1,
            "class_registry": self.class_registry,
            "config_echo": self.config_echo,
            "folds": self.folds,
            "arms": self.arms,
            "cells": self.cells,
            "averages": self.averages,
            "deltas": self.deltas,
        }


def write_report_csv(report: ExperimentReport, path) -> None:
    """Long-form accuracy grid: one row per cell."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["model", "k", "i", "augmented", "fold", "accuracy"])
        for cell in report.cells:
            writer.writerow(
                [
                    cell["model"],
                    cell["k_effective"],
                    cell["i"],
                    int(cell["augmented"]),
                    cell["fold"],
                    repr(cell["accuracy"]) if cell["status"] == "ok" else "NA",
                ]
            )


def write_report_json(report: ExperimentReport, path) -> None:
    with open(path, "w") as f:
        json.dump(report.to_document(), f, indent=1)


def _resolve_top_k(top_k, width: int) -> list[tuple[str, int]]:
    """Normalize requested k values to (requested, effective) pairs."""
    resolved = []
    for k in top_k:
        if k in ("full", None):
            resolved.append(("full", width))
        else:
            resolved.append((str(int(k)), int(k)))
    return resolved


def run_experiment(store, config) -> ExperimentReport:
    """Run the LOCO grid over models x top-k x i x (un)augmented arms.

    `store` is an InstanceStore of unaugmented instances; `config` is a
    RunConfig. Failed cells (for example a class short of i instances) are
    recorded with their reason and do not abort the rest of the grid.
    """
    for name in config.models:
        if name not in MODEL_VARIANTS:
            raise ValueError(f"unknown model {name!r} (expected one of {MODEL_VARIANTS})")
    spec = get_preset(config.augmentation)
    if any(inst.augmentation is not None for inst in store.instances):
        raise ValueError(
            "instance store already contains augmented instances; "
            "evaluation augments training folds itself"
        )

    clips_per_class: dict = {}
    for label, ordinal in store.clip_info.values():
        clips_per_class.setdefault(label, []).append(ordinal)
    folds = make_loco_folds(clips_per_class)
    registry = sorted(clips_per_class)

    mfcc_config = MfccConfig(aggregation=config.aggregation)
    all_features = build_dataset(store.instances, mfcc_config, store.sample_rate)
    width = all_features.width
    ordinals = np.asarray(
        [store.clip_info[inst.clip_id][1] for inst in store.instances], dtype=np.intp
    )
    labels = np.asarray(all_features.labels, dtype=object)

    arms = [False] + ([True] if spec is not None else [])
    ks = _resolve_top_k(config.top_k, width)
    for _, k_eff in ks:
        if not 1 <= k_eff <= width:
            raise ValueError(f"top-k value {k_eff} outside [1, {width}]")

    augmented_rows_cache: dict[int, np.ndarray] = {}

    def augmented_rows(pos: int) -> np.ndarray:
        if pos not in augmented_rows_cache:
            inst = store.instances[pos]
            variants = augment(inst, spec, store.sample_rate)[1:]  # original row is cached already
            mats = [build_dataset([v], mfcc_config, store.sample_rate).features[0] for v in variants]
            augmented_rows_cache[pos] = np.vstack(mats)
        return augmented_rows_cache[pos]

    report = ExperimentReport(class_registry=registry, config_echo=config.echo())

    for fold in folds:
        train_pos = np.flatnonzero(np.isin(ordinals, fold.train_clip_ordinals))
        test_pos = np.flatnonzero(ordinals == fold.test_clip_ordinal)
        train_clips = {store.instances[p].clip_id for p in train_pos}
        test_clips = {store.instances[p].clip_id for p in test_pos}
        assert not (train_clips & test_clips), "train/test clip leak"
        assert all(store.instances[p].augmentation is None for p in test_pos), (
            "augmented instance reached a test set"
        )
        report.folds.append(
            {
                "fold": fold.test_clip_ordinal,
                "train_clip_ordinals": list(fold.train_clip_ordinals),
                "test_clip_ordinal": fold.test_clip_ordinal,
                "train_clip_ids": sorted(train_clips),
                "test_clip_ids": sorted(test_clips),
                "train_counts": {
                    label: int((labels[train_pos] == label).sum()) for label in registry
                },
                "test_counts": {
                    label: int((labels[test_pos] == label).sum()) for label in registry
                },
            }
        )

        test_ds = all_features.subset(test_pos) if len(test_pos) else None

        for i in config.balanced_i:
            for augmented in arms:
                _run_arm(
                    report, store, config, fold, i, augmented,
                    train_pos, test_pos, test_ds, all_features,
                    augmented_rows, ks, registry,
                )

    _summarize(report)
    return report


def _run_arm(report, store, config, fold, i, augmented, train_pos, test_pos,
             test_ds, all_features, augmented_rows, ks, registry):
    """One (fold, i, arm) slice of the grid: balance, augment, rank, evaluate."""

    def fail_all(reason: str):
        for k_req, k_eff in ks:
            for name in config.models:
                report.cells.append(_cell(name, k_req, k_eff, i, augmented, fold,
                                          status="failed", reason=reason))

    if test_ds is None:
        fail_all("test clip has no instances")
        return
    rng = _derive_rng(config.seed, _BALANCE_TAG, i, fold.test_clip_ordinal, int(augmented))
    try:
        balanced = balance_indices([all_features.labels[p] for p in train_pos], i, rng)
    except ValueError as e:
        fail_all(str(e))
        return
    chosen = [int(train_pos[b]) for b in balanced]

    if augmented:
        blocks = []
        for pos in chosen:
            blocks.append(all_features.features[[pos]])
            blocks.append(augmented_rows(pos))
        train_features = np.vstack(blocks)
        n_variants = 1 + augmented_rows(chosen[0]).shape[0]
        train_labels = [all_features.labels[pos] for pos in chosen for _ in range(n_variants)]
        train_clip_ids = [all_features.clip_ids[pos] for pos in chosen for _ in range(n_variants)]
    else:
        train_features = all_features.features[chosen]
        train_labels = [all_features.labels[pos] for pos in chosen]
        train_clip_ids = [all_features.clip_ids[pos] for pos in chosen]
    train_ds = Dataset(
        features=train_features,
        labels=train_labels,
        clip_ids=train_clip_ids,
        feature_names=list(all_features.feature_names),
    )

    try:
        ranking_model = DecisionTreeModel.fit(train_ds.features, train_ds.labels)
        ranking = rank_features(ranking_model.feature_importance())
    except ValueError as e:
        fail_all(f"feature ranking failed: {e}")
        return
    imp_sums = {
        str(k): importance_sum(ranking, k) for k in (10, 20, 30) if k <= train_ds.width
    }
    report.arms.append(
        {
            "fold": fold.test_clip_ordinal,
            "i": i,
            "augmented": augmented,
            "train_rows": train_ds.n_rows,
            "importance_sums": imp_sums,
            "ranking_head": [int(x) for x in ranking.order[: min(40, train_ds.width)]],
        }
    )

    for k_req, k_eff in ks:
        tr = select_top_k(train_ds, ranking, k_eff)
        te = select_top_k(test_ds, ranking, k_eff)
        for name in config.models:
            seed = _derive_model_seed(
                config.seed, _MODEL_TAG, i, fold.test_clip_ordinal,
                int(augmented), MODEL_VARIANTS.index(name), k_eff,
            )
            try:
                model = train_model(name, tr, seed=seed)
                preds = model.predict_batch(te)
                cm = confusion_matrix(te.labels, preds, registry)
                cell = _cell(name, k_req, k_eff, i, augmented, fold, status="ok")
                cell["accuracy"] = accuracy(cm)
                cell["confusion"] = cm.counts.tolist()
                cell["importance_sums"] = imp_sums
                report.cells.append(cell)
            except ValueError as e:
                report.cells.append(_cell(name, k_req, k_eff, i, augmented, fold,
                                          status="failed", reason=str(e)))


def _cell(model, k_req, k_eff, i, augmented, fold, status, reason=None):
    cell = {
        "model": model,
        "k": k_req,
        "k_effective": k_eff,
        "i": i,
        "augmented": augmented,
        "fold": fold.test_clip_ordinal,
        "status": status,
        "accuracy": None,
    }
    if reason is not None:
        cell["reason"] = reason
    return cell


def _summarize(report: ExperimentReport) -> None:
    """Fold-averaged accuracies per configuration plus after-minus-before deltas."""
    groups: dict = {}
    for cell in report.cells:
        if cell["status"] != "ok":
            continue
        key = (cell["model"], cell["k"], cell["i"], cell["augmented"])
        groups.setdefault(key, []).append(cell["accuracy"])
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
        model, k, i, augmented = key
        accs = groups[key]
        report.averages.append(
            {
                "model": model,
                "k": k,
                "i": i,
                "augmented": augmented,
                "mean_accuracy": float(np.mean(accs)),
                "n_folds": len(accs),
            }
        )
    means = {
        (a["model"], a["k"], a["i"], a["augmented"]): a["mean_accuracy"]
        for a in report.averages
    }
    for (model, k, i, augmented), mean in sorted(means.items()):
        if augmented:
            before = means.get((model, k, i, False))
            if before is not None:
                report.deltas.append(
                    {"model": model, "k": k, "i": i, "delta": mean - before}
                )
