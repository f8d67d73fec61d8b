import numpy as np
import pytest

from adselect.detectors import POOL, threshold_and_label
from adselect.series import WindowSet
from adselect.signals import (
    FEATURES_PER_DETECTOR,
    N_FEATURES,
    TABLE_COLUMNS,
    SignalError,
    SignalTable,
    assemble,
    consensus,
    dist_to_threshold,
    load_table_csv,
    save_table_csv,
    with_column,
)


def toy_window_set(n=10, seed=0):
    rng = np.random.default_rng(seed)
    windows = rng.uniform(0.0, 1.0, size=(n, 6))
    labels = (rng.random(n) < 0.3).astype(np.int8)
    return WindowSet(windows=windows, window_labels=labels, origin_index=np.arange(n))


def toy_outputs(ws, contamination=0.3, seed=1):
    rng = np.random.default_rng(seed)
    return {kind: threshold_and_label(rng.normal(size=len(ws.windows)), contamination)
            for kind in POOL}


class TestDistToThreshold:
    def test_at_threshold(self):
        assert dist_to_threshold(0.5, 0.5) == 0.0

    def test_below_threshold(self):
        assert dist_to_threshold(0.35, 0.5) == pytest.approx(-0.15)

    def test_full_margin(self):
        assert dist_to_threshold(1.0, 0.0) == 1.0

    def test_custom_range(self):
        assert dist_to_threshold(6.0, 4.0, score_min=0.0, score_max=10.0) == pytest.approx(0.2)

    def test_degenerate_range(self):
        with pytest.raises(SignalError):
            dist_to_threshold(0.5, 0.5, score_min=2.0, score_max=2.0)
        with pytest.raises(SignalError):
            dist_to_threshold(0.5, 0.5, score_min=3.0, score_max=1.0)


class TestConsensus:
    def test_unanimous(self):
        assert consensus([1, 1, 1, 1, 1, 1], 0) == 1.0
        assert consensus([0, 0, 0, 0, 0, 0], 3) == 1.0

    def test_four_of_six(self):
        assert consensus([1, 1, 1, 1, 0, 0], 0) == pytest.approx(4 / 6)

    def test_lone_dissenter(self):
        labels = [1, 0, 0, 0, 0, 0]
        assert consensus(labels, 0) == pytest.approx(1 / 6)
        assert consensus(labels, 1) == pytest.approx(5 / 6)

    def test_wrong_length(self):
        with pytest.raises(SignalError):
            consensus([1, 0, 1], 0)


class TestAssemble:
    def test_shape_and_columns(self):
        ws = toy_window_set(5)
        table = assemble(ws, toy_outputs(ws))
        assert table.data.shape == (5, 37)
        assert table.columns == TABLE_COLUMNS
        assert TABLE_COLUMNS[0] == "w0" and TABLE_COLUMNS[-1] == "ground_truth"
        assert N_FEATURES == 36

    def test_window_values_copied(self):
        ws = toy_window_set(8, seed=3)
        table = assemble(ws, toy_outputs(ws, seed=4))
        np.testing.assert_array_equal(table.data[:, :6], ws.windows)
        np.testing.assert_array_equal(table.ground_truth, ws.window_labels)

    def test_threshold_columns_constant(self):
        ws = toy_window_set(12, seed=5)
        outputs = toy_outputs(ws, seed=6)
        table = assemble(ws, outputs)
        for kind in POOL:
            col = table.column(f"threshold_{kind}")
            assert np.ptp(col) == 0.0
            assert col[0] == outputs[kind].threshold

    def test_consensus_consistency_per_row(self):
        ws = toy_window_set(20, seed=7)
        table = assemble(ws, toy_outputs(ws, seed=8))
        labels = table.detector_labels()
        for d, kind in enumerate(POOL):
            conf = table.column(f"consensus_conf_{kind}")
            for t in range(len(table)):
                assert conf[t] == pytest.approx(consensus(labels[t], d))

    def test_margin_sign_matches_label_when_distinct(self):
        ws = toy_window_set(15, seed=9)
        outputs = toy_outputs(ws, contamination=0.2, seed=10)
        table = assemble(ws, outputs)
        for kind in POOL:
            margin = table.column(f"dist_conf_{kind}")
            label = table.column(f"predicted_label_{kind}")
            np.testing.assert_array_equal(margin > 0, label == 1)

    def test_margin_equals_score_minus_threshold(self):
        ws = toy_window_set(10, seed=11)
        table = assemble(ws, toy_outputs(ws, seed=12))
        for kind in POOL:
            expect = table.column(f"scaled_score_{kind}") - table.column(f"threshold_{kind}")
            np.testing.assert_allclose(table.column(f"dist_conf_{kind}"), expect, atol=1e-15)

    def test_raw_margin_variant(self):
        ws = toy_window_set(10, seed=13)
        outputs = toy_outputs(ws, seed=14)
        table = assemble(ws, outputs, margin_on="raw")
        # raw scores minmax to scaled, so both margins coincide here
        scaled = assemble(ws, outputs, margin_on="scaled")
        for kind in POOL:
            np.testing.assert_allclose(table.column(f"dist_conf_{kind}"),
                                       scaled.column(f"dist_conf_{kind}"), atol=1e-12)

    def test_missing_detector(self):
        ws = toy_window_set(6)
        outputs = toy_outputs(ws)
        del outputs["usad"]
        with pytest.raises(SignalError, match="usad"):
            assemble(ws, outputs)

    def test_length_mismatch(self):
        ws = toy_window_set(6)
        outputs = toy_outputs(ws)
        short = toy_window_set(5)
        outputs["knn"] = toy_outputs(short)["knn"]
        with pytest.raises(SignalError, match="knn"):
            assemble(ws, outputs)

    def test_all_normal_ground_truth_flows_through(self):
        ws = toy_window_set(6)
        clean = WindowSet(windows=ws.windows, window_labels=np.zeros(6, dtype=np.int8),
                          origin_index=ws.origin_index)
        table = assemble(clean, toy_outputs(ws))
        assert table.ground_truth.sum() == 0

    def test_bad_margin_mode(self):
        ws = toy_window_set(6)
        with pytest.raises(SignalError):
            assemble(ws, toy_outputs(ws), margin_on="zscore")


class TestTableOps:
    def test_column_lookup_error(self):
        ws = toy_window_set(4)
        table = assemble(ws, toy_outputs(ws))
        with pytest.raises(SignalError, match="no column"):
            table.column("w9")

    def test_subset(self):
        ws = toy_window_set(10, seed=15)
        table = assemble(ws, toy_outputs(ws, seed=16))
        sub = table.subset([2, 5, 7])
        assert len(sub) == 3
        np.testing.assert_array_equal(sub.data[1], table.data[5])

    def test_with_column(self):
        ws = toy_window_set(5)
        table = assemble(ws, toy_outputs(ws))
        extra = with_column(table, "note", np.arange(5.0))
        assert extra.columns[-1] == "note"
        np.testing.assert_array_equal(extra.column("note"), np.arange(5.0))
        with pytest.raises(SignalError, match="already present"):
            with_column(extra, "note", np.zeros(5))
        with pytest.raises(SignalError, match="shape"):
            with_column(table, "bad", np.zeros(4))

    def test_shape_validation(self):
        with pytest.raises(SignalError):
            SignalTable(columns=("a", "b"), data=np.zeros((3, 3)))

    def test_csv_round_trip(self, tmp_path):
        ws = toy_window_set(9, seed=17)
        table = assemble(ws, toy_outputs(ws, seed=18))
        path = tmp_path / "signals.csv"
        save_table_csv(path, table)
        back = load_table_csv(path)
        assert back.columns == table.columns
        np.testing.assert_array_equal(back.data, table.data)  # repr round-trips exactly

    def test_csv_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(SignalError, match="header"):
            load_table_csv(path)

    def test_csv_rejects_short_row(self, tmp_path):
        ws = toy_window_set(5)
        table = assemble(ws, toy_outputs(ws))
        path = tmp_path / "signals.csv"
        save_table_csv(path, table)
        lines = path.read_text().splitlines()
        lines[2] = "1.0,2.0"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SignalError, match="expected 37 fields"):
            load_table_csv(path)
