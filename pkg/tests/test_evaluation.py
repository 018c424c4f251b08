import dataclasses

import numpy as np
import pytest

from insectsound.config import RunConfig
from insectsound.evaluation import (
    ConfusionMatrix,
    FoldSpec,
    accuracy,
    balance,
    confusion_matrix,
    make_loco_folds,
    make_random_split,
    run_experiment,
    write_report_csv,
)
from insectsound.features import Dataset
from insectsound.segmentation import Instance

FOUR_CLASSES = {"C1": [1, 2, 3, 4, 5], "C2": [1, 2, 3, 4, 5],
                "C3": [1, 2, 3, 4, 5], "C4": [1, 2, 3, 4, 5]}


class TestLocoFolds:
    def test_five_clips_five_folds(self):
        folds = make_loco_folds(FOUR_CLASSES)
        assert len(folds) == 5
        assert folds[0].test_clip_ordinal == 5
        assert folds[0].train_clip_ordinals == (1, 2, 3, 4)
        assert folds[-1].test_clip_ordinal == 1
        assert folds[-1].train_clip_ordinals == (2, 3, 4, 5)

    def test_partition_invariant(self):
        for fold in make_loco_folds(FOUR_CLASSES):
            combined = set(fold.train_clip_ordinals) | {fold.test_clip_ordinal}
            assert combined == {1, 2, 3, 4, 5}
            assert fold.test_clip_ordinal not in fold.train_clip_ordinals

    def test_two_clips_minimal(self):
        folds = make_loco_folds({"C1": [1, 2], "C2": [1, 2]})
        assert len(folds) == 2

    def test_unequal_counts_rejected(self):
        with pytest.raises(ValueError, match="unequal"):
            make_loco_folds({"C1": [1, 2, 3, 4, 5], "C2": [1, 2, 3, 4]})

    def test_single_clip_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            make_loco_folds({"C1": [1]})

    def test_non_contiguous_rejected(self):
        with pytest.raises(ValueError, match="contiguous"):
            make_loco_folds({"C1": [1, 3]})

    def test_foldspec_overlap_rejected(self):
        with pytest.raises(ValueError):
            FoldSpec(test_clip_ordinal=1, train_clip_ordinals=(1, 2))


def _labeled_dataset(rows_per_class=100, n_classes=4, width=3, seed=0):
    rng = np.random.default_rng(seed)
    n = rows_per_class * n_classes
    labels = [f"C{c + 1}" for c in range(n_classes) for _ in range(rows_per_class)]
    return Dataset(
        features=rng.normal(size=(n, width)),
        labels=labels,
        clip_ids=["x"] * n,
        feature_names=[f"f{i}" for i in range(width)],
    )


class TestRandomSplit:
    def test_eighty_twenty_per_class(self):
        ds = _labeled_dataset(rows_per_class=100)
        train, test = make_random_split(ds, 0.2, seed=1)
        for label in ("C1", "C2", "C3", "C4"):
            assert sum(1 for l in test.labels if l == label) == 20
            assert sum(1 for l in train.labels if l == label) == 80

    def test_same_seed_same_split(self):
        ds = _labeled_dataset()
        a_train, a_test = make_random_split(ds, 0.2, seed=7)
        b_train, b_test = make_random_split(ds, 0.2, seed=7)
        np.testing.assert_array_equal(a_train.features, b_train.features)
        np.testing.assert_array_equal(a_test.features, b_test.features)

    def test_disjoint_and_complete(self):
        ds = _labeled_dataset(rows_per_class=25)
        train, test = make_random_split(ds, 0.2, seed=3)
        assert train.n_rows + test.n_rows == ds.n_rows

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
    def test_fraction_out_of_range(self, fraction):
        ds = _labeled_dataset(rows_per_class=10)
        with pytest.raises(ValueError):
            make_random_split(ds, fraction, seed=0)

    def test_tiny_class_rejected(self):
        ds = Dataset(np.zeros((3, 1)), ["A", "A", "B"], ["x"] * 3, ["f0"])
        with pytest.raises(ValueError, match="fewer than 2"):
            make_random_split(ds, 0.5, seed=0)


def _instances(counts: dict):
    out = []
    for label, n in counts.items():
        for m in range(n):
            out.append(Instance(np.zeros(4), label, f"{label}_clip", 0, m))
    return out


class TestBalance:
    def test_paper_counts(self):
        instances = _instances({"C1": 167, "C2": 321, "C3": 217, "C4": 394})
        balanced = balance(instances, 30, seed=0)
        assert len(balanced) == 120
        for label in ("C1", "C2", "C3", "C4"):
            assert sum(1 for inst in balanced if inst.class_label == label) == 30

    def test_boundary_keeps_all_rows(self):
        instances = _instances({"C1": 10, "C2": 15})
        balanced = balance(instances, 10, seed=0)
        c1 = [inst for inst in balanced if inst.class_label == "C1"]
        assert len(c1) == 10

    def test_error_names_class_and_count(self):
        instances = _instances({"C1": 167, "C2": 321, "C3": 217, "C4": 394})
        with pytest.raises(ValueError, match="C1 has only 167"):
            balance(instances, 400, seed=0)

    def test_deterministic(self):
        instances = _instances({"C1": 50, "C2": 50})
        a = balance(instances, 20, seed=9)
        b = balance(instances, 20, seed=9)
        assert [(x.class_label, x.window_number) for x in a] == [
            (x.class_label, x.window_number) for x in b
        ]

    def test_no_replacement(self):
        instances = _instances({"C1": 40})
        balanced = balance(instances, 40, seed=2)
        keys = [(x.class_label, x.window_number) for x in balanced]
        assert len(set(keys)) == 40


class TestConfusionMatrix:
    REG = ["C1", "C2", "C3"]

    def test_perfect_is_diagonal(self):
        cm = confusion_matrix(["C1", "C2", "C3"], ["C1", "C2", "C3"], self.REG)
        np.testing.assert_array_equal(cm.counts, np.eye(3, dtype=int))

    def test_degenerate_predictor_single_column(self):
        cm = confusion_matrix(["C1", "C2", "C3"], ["C1", "C1", "C1"], self.REG)
        assert cm.counts[:, 0].tolist() == [1, 1, 1]
        assert cm.counts[:, 1:].sum() == 0

    def test_empty_inputs(self):
        cm = confusion_matrix([], [], self.REG)
        assert cm.counts.sum() == 0

    def test_row_sums_are_true_counts(self):
        true = ["C1"] * 5 + ["C2"] * 3
        pred = ["C1", "C2", "C1", "C3", "C1", "C2", "C2", "C1"]
        cm = confusion_matrix(true, pred, self.REG)
        assert cm.counts.sum(axis=1).tolist() == [5, 3, 0]
        assert cm.total == 8

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            confusion_matrix(["C1"], [], self.REG)

    def test_unknown_label(self):
        with pytest.raises(ValueError, match="registry"):
            confusion_matrix(["C9"], ["C1"], self.REG)


class TestAccuracy:
    def test_perfect(self):
        cm = ConfusionMatrix(np.diag([30, 30, 30, 30]), ["C1", "C2", "C3", "C4"])
        assert accuracy(cm) == 1.0

    def test_half(self):
        counts = np.diag([15, 15, 15, 15])
        counts[0, 1] = 60
        cm = ConfusionMatrix(counts, ["C1", "C2", "C3", "C4"])
        assert accuracy(cm) == 0.5

    def test_uniform_random_predictor_near_quarter(self):
        rng = np.random.default_rng(123)
        registry = ["C1", "C2", "C3", "C4"]
        true = [registry[i % 4] for i in range(1000)]
        pred = [registry[k] for k in rng.integers(0, 4, size=1000)]
        acc = accuracy(confusion_matrix(true, pred, registry))
        assert abs(acc - 0.25) < 0.05

    def test_empty_rejected(self):
        cm = ConfusionMatrix(np.zeros((2, 2), dtype=int), ["A", "B"])
        with pytest.raises(ValueError):
            accuracy(cm)


@pytest.fixture(scope="module")
def small_config():
    return RunConfig(
        models=["decision_tree"],
        balanced_i=[5],
        top_k=[10, "full"],
        augmentation="narrow",
        seed=11,
    )


@pytest.fixture(scope="module")
def small_report(fixture_store, small_config):
    return run_experiment(fixture_store, small_config)


class TestRunExperiment:
    def test_grid_arithmetic(self, small_report):
        # 5 folds x 1 i x 2 arms x 2 k x 1 model
        assert len(small_report.cells) == 20
        assert small_report.n_failed == 0

    def test_clip_disjointness_recorded(self, small_report):
        for fold in small_report.folds:
            assert not set(fold["train_clip_ids"]) & set(fold["test_clip_ids"])

    def test_augmented_arm_row_counts(self, small_report):
        for arm in small_report.arms:
            expected = 5 * 4 * (7 if arm["augmented"] else 1)
            assert arm["train_rows"] == expected

    def test_accuracy_equals_trace_over_total(self, small_report):
        for cell in small_report.cells:
            counts = np.asarray(cell["confusion"])
            assert cell["accuracy"] == pytest.approx(
                np.trace(counts) / counts.sum()
            )

    def test_averages_recomputable_from_cells(self, small_report):
        for avg in small_report.averages:
            accs = [
                c["accuracy"]
                for c in small_report.cells
                if c["status"] == "ok"
                and (c["model"], c["k"], c["i"], c["augmented"])
                == (avg["model"], avg["k"], avg["i"], avg["augmented"])
            ]
            assert avg["mean_accuracy"] == pytest.approx(float(np.mean(accs)))
            assert avg["n_folds"] == len(accs)

    def test_deltas_after_minus_before(self, small_report):
        means = {
            (a["model"], a["k"], a["i"], a["augmented"]): a["mean_accuracy"]
            for a in small_report.averages
        }
        for d in small_report.deltas:
            key_after = (d["model"], d["k"], d["i"], True)
            key_before = (d["model"], d["k"], d["i"], False)
            assert d["delta"] == pytest.approx(means[key_after] - means[key_before])

    def test_importance_sums_monotone(self, small_report):
        for arm in small_report.arms:
            sums = [arm["importance_sums"][k] for k in ("10", "20", "30")]
            assert sums[0] <= sums[1] <= sums[2]

    def test_deterministic_csv(self, fixture_store, small_config, tmp_path):
        report_a = run_experiment(fixture_store, small_config)
        report_b = run_experiment(fixture_store, small_config)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_report_csv(report_a, a)
        write_report_csv(report_b, b)
        assert a.read_bytes() == b.read_bytes()

    def test_impossible_i_fails_cells_with_reason(self, fixture_store, small_config):
        config = dataclasses.replace(small_config, balanced_i=[10**6],
                                     models=["decision_tree"], top_k=["full"])
        report = run_experiment(fixture_store, config)
        assert report.n_failed == len(report.cells) == 10  # 5 folds x 2 arms
        assert all("fewer than" in c["reason"] for c in report.cells)

    def test_unknown_model_rejected_before_work(self, fixture_store, small_config):
        config = dataclasses.replace(small_config, models=["quantum_leap"])
        with pytest.raises(ValueError, match="unknown model"):
            run_experiment(fixture_store, config)

    def test_store_with_augmented_instances_rejected(self, fixture_store, small_config):
        from insectsound.augmentation import augment, preset_narrow
        import copy

        store = copy.copy(fixture_store)
        store.instances = augment(
            fixture_store.instances[0], preset_narrow(), fixture_store.sample_rate
        )
        with pytest.raises(ValueError, match="already contains augmented"):
            run_experiment(store, small_config)


class TestRankingLeakResistance:
    def test_mutating_test_rows_never_changes_ranking(self, fixture_store):
        # the ranking the experiment uses is a function of the training fold only
        from insectsound.classifiers.cart import DecisionTreeModel
        from insectsound.features import MfccConfig, build_dataset, rank_features

        config = MfccConfig()
        ds = build_dataset(fixture_store.instances, config, fixture_store.sample_rate)
        ordinals = np.asarray(
            [fixture_store.clip_info[i.clip_id][1] for i in fixture_store.instances]
        )
        train = ds.subset(np.flatnonzero(ordinals != 5))
        test = ds.subset(np.flatnonzero(ordinals == 5))

        model = DecisionTreeModel.fit(train.features, train.labels)
        ranking_before = rank_features(model.feature_importance())
        test.features += 1e3  # corrupt every test row
        model_after = DecisionTreeModel.fit(train.features, train.labels)
        ranking_after = rank_features(model_after.feature_importance())
        np.testing.assert_array_equal(ranking_before.order, ranking_after.order)
        np.testing.assert_array_equal(ranking_before.importance, ranking_after.importance)
