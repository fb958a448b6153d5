"""Confusion matrices, per-class accuracy and the report bundle written by the CLI."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from irn.errors import DataError


def confusion_matrix(truth, preds, n_classes: int) -> np.ndarray:
    """C x C counts with rows indexed by the true class."""
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    if truth.shape != preds.shape:
        raise DataError(f"{truth.size} labels but {preds.size} predictions")
    for name, arr in (("label", truth), ("prediction", preds)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise DataError(f"{name} outside 0..{n_classes - 1}")
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (truth, preds), 1)
    return out


def per_class_accuracy(matrix) -> np.ndarray:
    """Diagonal over row sums; classes with no test samples are NaN (absent, not 0)."""
    m = np.asarray(matrix, dtype=np.float64)
    rows = m.sum(axis=1)
    out = np.full(m.shape[0], np.nan)
    seen = rows > 0
    out[seen] = np.diag(m)[seen] / rows[seen]
    return out


def _clean(value):
    # JSON has no NaN; absent values become null
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    return value


def format_grid(matrix, classes: Sequence[str]) -> str:
    m = np.asarray(matrix)
    width = max([len(c) for c in classes] + [len(str(int(m.max()))) if m.size else 1, 5])
    lines = ["truth\\pred".ljust(width) + " " + " ".join(c[:width].rjust(width) for c in classes)]
    for name, row in zip(classes, m):
        lines.append(name[:width].ljust(width) + " " + " ".join(str(int(v)).rjust(width) for v in row))
    return "\n".join(lines) + "\n"


@dataclass
class ReportBundle:
    name: str
    classes: list[str]
    fold_accuracies: list[float]
    confusion: np.ndarray
    meta: dict = field(default_factory=dict)
    fold_sizes: list[int] = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies)) if self.fold_accuracies else float("nan")

    @property
    def per_class(self) -> np.ndarray:
        return per_class_accuracy(self.confusion)

    @property
    def pooled_accuracy(self) -> float:
        total = self.confusion.sum()
        return float(np.trace(self.confusion) / total) if total else float("nan")

    def check(self, class_counts: Sequence[int] | None = None) -> None:
        """Raise if the confusion matrix disagrees with the fold results."""
        if self.fold_sizes and int(self.confusion.sum()) != sum(self.fold_sizes):
            raise DataError("confusion matrix total differs from the number of test samples")
        if class_counts is not None and not np.array_equal(self.confusion.sum(axis=1), class_counts):
            raise DataError("confusion matrix row sums differ from per-class test counts")
        if self.fold_sizes:
            correct = sum(round(a * n) for a, n in zip(self.fold_accuracies, self.fold_sizes))
            if correct != int(np.trace(self.confusion)):
                raise DataError("confusion matrix trace differs from the fold accuracies")

    def to_dict(self) -> dict:
        return _clean({
            "name": self.name,
            "classes": list(self.classes),
            "fold_accuracies": [float(a) for a in self.fold_accuracies],
            "fold_sizes": [int(n) for n in self.fold_sizes],
            "mean_accuracy": self.mean_accuracy,
            "pooled_accuracy": self.pooled_accuracy,
            "per_class_accuracy": [float(a) for a in self.per_class],
            "confusion": self.confusion.astype(int).tolist(),
            "meta": self.meta,
        })

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")
        with open(out / "folds.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fold", "n_test", "accuracy"])
            for i, acc in enumerate(self.fold_accuracies):
                n = self.fold_sizes[i] if i < len(self.fold_sizes) else ""
                w.writerow([i, n, repr(float(acc))])
            w.writerow(["mean", sum(self.fold_sizes), repr(self.mean_accuracy)])
        with open(out / "per_class.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["class", "n_test", "accuracy"])
            for name, n, acc in zip(self.classes, self.confusion.sum(axis=1), self.per_class):
                w.writerow([name, int(n), "" if math.isnan(acc) else repr(float(acc))])
        with open(out / "confusion.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["truth"] + list(self.classes))
            for name, row in zip(self.classes, self.confusion):
                w.writerow([name] + [int(v) for v in row])
        (out / "confusion.txt").write_text(format_grid(self.confusion, self.classes))
        return out / "report.json"


def write_table(rows: Sequence[dict], path_csv, path_json) -> None:
    """Ablation table: one row per experiment label."""
    with open(path_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "accuracy", "fold_accuracies", "error"])
        for r in rows:
            acc = "" if r.get("accuracy") is None else repr(float(r["accuracy"]))
            folds = ";".join(repr(float(a)) for a in r.get("fold_accuracies", []))
            w.writerow([r["label"], acc, folds, r.get("error") or ""])
    Path(path_json).write_text(json.dumps(_clean(list(rows)), indent=1, sort_keys=True) + "\n")


def format_table(rows: Sequence[dict]) -> str:
    width = max(len(r["label"]) for r in rows) if rows else 10
    lines = []
    for r in rows:
        acc = "failed" if r.get("accuracy") is None else f"{100 * r['accuracy']:.1f}%"
        lines.append(f"{r['label'].ljust(width)}  {acc}")
    return "\n".join(lines) + "\n"
