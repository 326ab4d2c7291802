import csv
import os

import numpy as np
import pytest

from conftest import fast_settings
from seqids.actions import AttackType
from seqids.experiment import (
    ExperimentReport,
    Fold,
    emit_report,
    evaluate,
    load_report,
    online_accuracy,
    run_method,
    run_offline_experiment,
    run_online_experiment,
    score_fold,
    stratified_split,
    table_rows,
)
from seqids.metrics import MetricSet


class TestSplit:
    def test_partition_and_fraction(self):
        types = np.repeat([0, 1], [50, 30])
        tr, te = stratified_split(types, seed=3)
        assert sorted(np.concatenate([tr, te]).tolist()) == list(range(80))
        assert (types[tr] == 0).sum() == 35 and (types[tr] == 1).sum() == 21

    def test_seed_changes_split(self):
        types = np.zeros(40, int)
        assert not np.array_equal(stratified_split(types, 0)[0], stratified_split(types, 1)[0])
        assert np.array_equal(stratified_split(types, 4)[0], stratified_split(types, 4)[0])


class TestFold:
    def test_preprocessing_uses_training_rows_only(self, small_arrays):
        fold = Fold(small_arrays, 0, fast_settings())
        poisoned = small_arrays.observations.copy()
        poisoned[fold.test] = 0.0
        data2 = type(small_arrays)(poisoned, small_arrays.actions, small_arrays.types,
                                   small_arrays.starts, small_arrays.names)
        fold2 = Fold(data2, 0, fast_settings())
        assert fold.reducer.report_.to_dict() == fold2.reducer.report_.to_dict()
        assert np.array_equal(fold.symbols(1)[0], fold2.symbols(1)[0])

    @pytest.mark.parametrize("method", ["hmm-sup", "hmm-unsup", "rfc", "lstm"])
    def test_run_method_shapes(self, small_arrays, method):
        fold = Fold(small_arrays, 1, fast_settings())
        pred, types = run_method(fold, method, 1)
        assert pred.shape == (len(fold.test), 10)
        assert set(types.tolist()) <= {0, 1}
        scores = score_fold(fold, pred, types)
        assert set(scores) == {"Type1", "Type2"}
        assert sum(m.l for m in scores.values()) == len(fold.test)

    def test_unknown_method(self, small_arrays):
        with pytest.raises(ValueError, match="unknown method"):
            run_method(Fold(small_arrays, 0, fast_settings()), "svm", 1)


class TestEvaluate:
    def test_reports_and_curves(self, small_arrays):
        reports, curves = evaluate(small_arrays, ["hmm-sup", "rfc"], (1,), (0, 1), fast_settings())
        assert [(r.method, r.top_k) for r in reports] == [("hmm-sup", 1), ("rfc", 1)]
        assert all(len(r.per_seed["Type1"]) == 2 for r in reports)
        assert [c.method for c in curves] == ["hmm-sup", "rfc"]
        assert len(curves[0].mean("Type1")) == 10

    def test_shared_folds_make_methods_comparable(self, small_arrays):
        a = run_offline_experiment(small_arrays, "rfc", 1, (2,), fast_settings())
        reports, _ = evaluate(small_arrays, ["hmm-sup", "rfc"], (1,), (2,), fast_settings(),
                              online_methods=())
        assert a.to_dict() == reports[1].to_dict()

    def test_online_rejects_lstm(self, small_arrays):
        with pytest.raises(ValueError, match="online"):
            run_online_experiment(small_arrays, ["lstm"], (0,), settings=fast_settings())

    def test_online_rfc_matches_offline(self, small_arrays):
        fold = Fold(small_arrays, 0, fast_settings())
        pred, _ = run_method(fold, "rfc", 1)
        A = small_arrays.actions[fold.test]
        rows = small_arrays.types[fold.test] == 0
        curve = online_accuracy(fold, "rfc", 1)["Type1"]
        assert np.allclose(curve, (pred == A)[rows].mean(axis=0))
        assert np.mean(curve) == pytest.approx(score_fold(fold, pred, _)["Type1"].acc_action)

    @pytest.mark.parametrize("seeds", [(), []])
    def test_needs_seeds(self, small_arrays, seeds):
        with pytest.raises(ValueError, match="seed"):
            evaluate(small_arrays, ["rfc"], (1,), seeds, fast_settings())

    def test_needs_enough_windows(self, small_arrays):
        tiny = type(small_arrays)(small_arrays.observations[:15], small_arrays.actions[:15],
                                  small_arrays.types[:15], small_arrays.starts[:15],
                                  small_arrays.names)
        with pytest.raises(ValueError, match="at least 10"):
            evaluate(tiny, ["rfc"], (1,), (0,), fast_settings())


def fake_report(method, k, value):
    ms = MetricSet(value, value, value, value, 5)
    return ExperimentReport(method, k, [0, 1], {"Type1": [ms, ms], "Type2": [ms, ms]})


class TestReportFiles:
    def test_table_layout(self):
        header, rows = table_rows([fake_report("rfc", 1, 0.5), fake_report("lstm", 4, 0.25)])
        assert header[0] == "method" and len(header) == 9
        assert [r[0] for r in rows] == ["LSTM", "RFC"]
        assert rows[0][1] == "" and rows[0][5] == "0.250000"

    def test_emit_and_load(self, tmp_path):
        reports = [fake_report("hmm-sup", 1, 0.75)]
        paths = emit_report(reports, str(tmp_path))
        assert {os.path.basename(p) for p in paths} == {"report.csv", "report_attack2.csv", "report.json"}
        rows = list(csv.reader(open(tmp_path / "report.csv")))
        assert rows[1][:2] == ["Supervised HMM", "0.750000"]
        back, curves = load_report(str(tmp_path / "report.json"))
        assert back[0].to_dict() == reports[0].to_dict() and curves == []

    def test_std_is_population(self):
        a, b = MetricSet(0.2, 1, 1, 1, 3), MetricSet(0.6, 1, 1, 1, 3)
        r = ExperimentReport("rfc", 1, [0, 1], {"Type1": [a, b]})
        assert r.std()["acc_start"] == pytest.approx(0.2)

    def test_empty(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report([], str(tmp_path))

    def test_not_a_report(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text('{"schema": "other"}')
        with pytest.raises(ValueError, match="not a report"):
            load_report(str(p))
