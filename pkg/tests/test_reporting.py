import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import confusion_matrix as sk_confusion

from irn.errors import DataError
from irn.reporting import ReportBundle, confusion_matrix, format_table, per_class_accuracy, write_table


def test_perfect_predictions_diagonal():
    y = np.array([0, 1, 2, 2, 1])
    m = confusion_matrix(y, y, 3)
    assert np.array_equal(m, np.diag([1, 2, 2]))


def test_all_class_zero_single_column():
    m = confusion_matrix([0, 1, 2, 1], [0, 0, 0, 0], 3)
    assert np.array_equal(m[:, 0], [1, 2, 1])
    assert m[:, 1:].sum() == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6).flatmap(lambda c: st.tuples(
    st.just(c), st.lists(st.tuples(st.integers(0, c - 1), st.integers(0, c - 1)), min_size=1, max_size=60))))
def test_matches_sklearn_and_total(case):
    C, pairs = case
    truth, preds = zip(*pairs)
    m = confusion_matrix(truth, preds, C)
    assert m.sum() == len(pairs)
    assert np.array_equal(m, sk_confusion(truth, preds, labels=list(range(C))))


def test_errors():
    with pytest.raises(DataError):
        confusion_matrix([0, 1], [0], 2)
    with pytest.raises(DataError):
        confusion_matrix([0, 3], [0, 1], 3)
    with pytest.raises(DataError):
        confusion_matrix([0, 1], [-1, 1], 3)


def test_per_class_absent_is_nan():
    m = confusion_matrix([0, 0, 2], [0, 1, 2], 3)
    acc = per_class_accuracy(m)
    assert acc[0] == 0.5 and acc[2] == 1.0
    assert np.isnan(acc[1])


def _bundle():
    folds = [([0, 1, 1, 2], [0, 1, 0, 2]), ([0, 2, 2], [0, 2, 1])]
    conf = sum(confusion_matrix(t, p, 3) for t, p in folds)
    accs = [float(np.mean(np.array(t) == np.array(p))) for t, p in folds]
    return ReportBundle("x", ["a", "b", "c"], accs, conf, {"fingerprint": "f", "seed": 0}, [4, 3])


def test_bundle_invariants_and_files(tmp_path):
    b = _bundle()
    b.check([2, 2, 3])
    assert b.mean_accuracy == pytest.approx((0.75 + 2 / 3) / 2)
    assert b.pooled_accuracy == pytest.approx(5 / 7)
    with pytest.raises(DataError):
        b.check([3, 2, 2])
    b.write(tmp_path)
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["meta"]["fingerprint"] == "f"
    assert np.array(rep["confusion"]).sum(axis=1).tolist() == [2, 2, 3]
    for name in ("folds.csv", "per_class.csv", "confusion.csv", "confusion.txt"):
        assert (tmp_path / name).exists()
    first = (tmp_path / "report.json").read_bytes()
    _bundle().write(tmp_path)
    assert (tmp_path / "report.json").read_bytes() == first


def test_bundle_rejects_inconsistent_trace():
    b = _bundle()
    b.fold_accuracies = [1.0, 1.0]
    with pytest.raises(DataError):
        b.check()


def test_nan_per_class_serialises_as_null(tmp_path):
    conf = confusion_matrix([0, 0], [0, 0], 2)
    b = ReportBundle("x", ["a", "b"], [1.0], conf, {}, [2])
    b.write(tmp_path)
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["per_class_accuracy"] == [1.0, None]


def test_table_with_failed_row(tmp_path):
    rows = [{"label": "A", "accuracy": 0.5, "fold_accuracies": [0.5], "error": None},
            {"label": "B", "accuracy": None, "fold_accuracies": [], "error": "boom"}]
    write_table(rows, tmp_path / "t.csv", tmp_path / "t.json")
    text = (tmp_path / "t.csv").read_text().splitlines()
    assert text[1].startswith("A,0.5") and text[2].endswith("boom")
    assert "failed" in format_table(rows)
