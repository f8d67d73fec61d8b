import numpy as np
import pytest

from adselect.detectors import POOL, threshold_and_label
from adselect.series import WindowSet
from adselect.signals import assemble
from adselect.tsf import (
    TSF_ROW_LENGTH,
    TsfDataset,
    TsfError,
    build_dataset,
    detector_feature_columns,
    fit_tsf,
    interval_features,
    load_tsf,
    save_tsf,
    split_20_80,
    stratified_indices,
)


def toy_table(n=20, seed=0, contamination=0.3):
    rng = np.random.default_rng(seed)
    windows = rng.uniform(0.0, 1.0, size=(n, 6))
    labels = (rng.random(n) < 0.3).astype(np.int8)
    ws = WindowSet(windows=windows, window_labels=labels, origin_index=np.arange(n))
    outputs = {kind: threshold_and_label(rng.normal(size=n), contamination) for kind in POOL}
    return assemble(ws, outputs)


def separable_dataset(n=60, seed=0):
    """Class decided by the mean of the first interval, cleanly separable."""
    rng = np.random.default_rng(seed)
    target = (rng.random(n) < 0.5).astype(np.int64)
    rows = rng.normal(size=(n, TSF_ROW_LENGTH)) * 0.1
    rows[target == 1, :6] += 3.0
    return TsfDataset("knn", rows, target)


class TestBuildDataset:
    def test_column_order_contract(self):
        cols = detector_feature_columns("knn")
        assert cols == ["w0", "w1", "w2", "w3", "w4", "w5", "scaled_score_knn",
                        "threshold_knn", "predicted_label_knn", "dist_conf_knn",
                        "consensus_conf_knn"]

    def test_target_is_correctness(self):
        table = toy_table(seed=1)
        for kind in POOL:
            ds = build_dataset(table, kind)
            predicted = table.column(f"predicted_label_{kind}").astype(int)
            expect = (predicted == table.ground_truth).astype(int)
            np.testing.assert_array_equal(ds.target, expect)
            assert ds.features.shape == (len(table), TSF_ROW_LENGTH)

    def test_correct_prediction_gives_one(self):
        table = toy_table(seed=2)
        ds = build_dataset(table, "knn")
        predicted = table.column("predicted_label_knn").astype(int)
        truth = table.ground_truth
        both_one = (predicted == 1) & (truth == 1)
        if both_one.any():
            assert (ds.target[both_one] == 1).all()
        miss = (predicted == 1) & (truth == 0)
        if miss.any():
            assert (ds.target[miss] == 0).all()

    def test_index_and_kind_equivalent(self):
        table = toy_table(seed=3)
        by_kind = build_dataset(table, "iforest")
        by_index = build_dataset(table, POOL.index("iforest"))
        np.testing.assert_array_equal(by_kind.features, by_index.features)
        assert by_kind.kind == by_index.kind == "iforest"

    def test_row_reconstruction(self):
        table = toy_table(seed=4)
        ds = build_dataset(table, "osvm")
        row0 = ds.features[0]
        np.testing.assert_array_equal(row0[:6], table.data[0, :6])
        assert row0[6] == table.column("scaled_score_osvm")[0]
        assert row0[7] == table.column("threshold_osvm")[0]
        assert row0[8] == table.column("predicted_label_osvm")[0]
        assert row0[9] == table.column("dist_conf_osvm")[0]
        assert row0[10] == table.column("consensus_conf_osvm")[0]

    def test_unknown_detector(self):
        table = toy_table()
        with pytest.raises(TsfError):
            build_dataset(table, "lof")
        with pytest.raises(TsfError):
            build_dataset(table, 6)


class TestSplit:
    def test_sizes_20_80(self):
        target = np.r_[np.zeros(80, dtype=int), np.ones(20, dtype=int)]
        train, test = stratified_indices(target, 0.2, seed=0)
        assert len(train) == 20 and len(test) == 80
        assert len(np.intersect1d(train, test)) == 0
        assert len(np.union1d(train, test)) == 100

    def test_stratified_class_shares(self):
        target = np.r_[np.zeros(80, dtype=int), np.ones(20, dtype=int)]
        train, _ = stratified_indices(target, 0.2, seed=1)
        assert (target[train] == 1).sum() == 4  # 20% of each class
        assert (target[train] == 0).sum() == 16

    def test_largest_remainder_total(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n = int(rng.integers(10, 200))
            target = (rng.random(n) < rng.uniform(0.1, 0.9)).astype(int)
            if len(np.unique(target)) < 2:
                continue
            train, test = stratified_indices(target, 0.2, seed=int(rng.integers(1000)))
            assert len(train) == round(0.2 * n)
            assert len(train) + len(test) == n

    def test_deterministic(self):
        target = np.r_[np.zeros(30, dtype=int), np.ones(10, dtype=int)]
        a = stratified_indices(target, 0.2, seed=7)
        b = stratified_indices(target, 0.2, seed=7)
        np.testing.assert_array_equal(a[0], b[0])
        c = stratified_indices(target, 0.2, seed=8)
        assert not np.array_equal(a[0], c[0])

    def test_single_class_warns_and_splits(self):
        target = np.ones(50, dtype=int)
        with pytest.warns(UserWarning, match="single-class"):
            train, test = stratified_indices(target, 0.2, seed=0)
        assert len(train) == 10 and len(test) == 40

    def test_too_few_rows(self):
        with pytest.raises(TsfError, match="at least 10"):
            stratified_indices(np.array([0, 1, 0, 1]), 0.2)

    def test_split_20_80_wrapper(self):
        ds = separable_dataset(100, seed=6)
        tr, te = split_20_80(ds, seed=0)
        assert len(tr) == 20 and len(te) == 80
        assert tr.kind == te.kind == "knn"


class TestIntervalFeatures:
    def test_slope_exact_on_line(self):
        # y = 2t + 1 over the interval -> slope exactly 2
        rows = (2.0 * np.arange(11) + 1.0).reshape(1, -1)
        feats = interval_features(rows, [(0, 11), (3, 8)])
        assert feats[0, 2] == pytest.approx(2.0, abs=1e-9)
        assert feats[0, 5] == pytest.approx(2.0, abs=1e-9)

    def test_mean_std_against_numpy(self):
        rng = np.random.default_rng(9)
        rows = rng.normal(size=(7, 11))
        feats = interval_features(rows, [(2, 9)])
        np.testing.assert_allclose(feats[:, 0], rows[:, 2:9].mean(axis=1), atol=1e-12)
        np.testing.assert_allclose(feats[:, 1], rows[:, 2:9].std(axis=1), atol=1e-12)

    def test_slope_against_polyfit(self):
        rng = np.random.default_rng(10)
        rows = rng.normal(size=(5, 11))
        feats = interval_features(rows, [(1, 7)])
        for i in range(5):
            slope = np.polyfit(np.arange(6), rows[i, 1:7], 1)[0]
            assert feats[i, 2] == pytest.approx(slope, abs=1e-9)

    def test_single_element_interval(self):
        rows = np.arange(11.0).reshape(1, -1)
        feats = interval_features(rows, [(4, 5)])
        assert feats[0, 0] == 4.0
        assert feats[0, 1] == 0.0
        assert feats[0, 2] == 0.0  # slope of one point defined as 0

    def test_feature_block_layout(self):
        rows = np.zeros((3, 11))
        feats = interval_features(rows, [(0, 2), (5, 9), (1, 4)])
        assert feats.shape == (3, 9)


class TestForest:
    def test_learns_separable_data(self):
        ds = separable_dataset(80, seed=11)
        model = fit_tsf(ds, n_trees=20, seed=0)
        acc = (model.predict(ds.features) == ds.target).mean()
        assert acc == 1.0

    def test_pure_class_predicts_constant(self):
        rows = np.random.default_rng(12).normal(size=(30, 11))
        for c in (0, 1):
            ds = TsfDataset("knn", rows, np.full(30, c, dtype=np.int64))
            model = fit_tsf(ds, n_trees=5, seed=0)
            assert (model.predict(rows) == c).all()

    def test_predict_deterministic(self):
        ds = separable_dataset(60, seed=13)
        model = fit_tsf(ds, n_trees=10, seed=4)
        a = model.predict(ds.features)
        b = model.predict(ds.features)
        np.testing.assert_array_equal(a, b)

    def test_fit_deterministic_by_seed(self):
        ds = separable_dataset(60, seed=14)
        p1 = fit_tsf(ds, n_trees=10, seed=3).predict(ds.features)
        p2 = fit_tsf(ds, n_trees=10, seed=3).predict(ds.features)
        np.testing.assert_array_equal(p1, p2)

    def test_train_accuracy_dominates_test_on_average(self):
        gaps = []
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            n = 80
            target = (rng.random(n) < 0.5).astype(np.int64)
            rows = rng.normal(size=(n, 11)) * 0.5
            rows[target == 1, 2] += 1.0  # weak, noisy signal
            ds = TsfDataset("knn", rows, target)
            tr, te = split_20_80(ds, seed=seed)
            model = fit_tsf(tr, n_trees=15, seed=seed)
            train_acc = (model.predict(tr.features) == tr.target).mean()
            test_acc = (model.predict(te.features) == te.target).mean()
            gaps.append(train_acc - test_acc)
        assert np.mean(gaps) >= 0.0

    def test_forest_tie_goes_to_class_one(self):
        ds = separable_dataset(40, seed=15)
        model = fit_tsf(ds, n_trees=2, seed=0)
        # force a tie: one tree always 0, one always 1
        model.trees = [
            {"intervals": [(0, 2)], "root": {"leaf": 0}},
            {"intervals": [(0, 2)], "root": {"leaf": 1}},
        ]
        model.n_trees = 2
        assert (model.predict(ds.features) == 1).all()

    def test_predict_shape_validation(self):
        ds = separable_dataset(40, seed=16)
        model = fit_tsf(ds, n_trees=3, seed=0)
        with pytest.raises(TsfError):
            model.predict(np.zeros((4, 10)))

    def test_empty_training_set(self):
        ds = TsfDataset("knn", np.zeros((0, 11)), np.zeros(0, dtype=np.int64))
        with pytest.raises(TsfError, match="empty"):
            fit_tsf(ds)

    def test_min_interval_validation(self):
        ds = separable_dataset(20, seed=17)
        with pytest.raises(TsfError):
            fit_tsf(ds, min_interval=0)
        with pytest.raises(TsfError):
            fit_tsf(ds, min_interval=12)

    def test_json_round_trip(self, tmp_path):
        ds = separable_dataset(50, seed=18)
        model = fit_tsf(ds, n_trees=8, seed=2)
        path = tmp_path / "tsf.json"
        save_tsf(model, path)
        back = load_tsf(path)
        assert back.kind == model.kind
        assert back.n_trees == model.n_trees
        np.testing.assert_array_equal(back.predict(ds.features), model.predict(ds.features))

    def test_load_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format_version": 99}')
        with pytest.raises(TsfError):
            load_tsf(path)
