"""Seen/unseen MAE, harmonic mean, cross-dataset aggregation and degradation."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, TextIO

import numpy as np

from .splitter import Folder, SplitManifest


class EvalSplit(enum.Enum):
    VAL = "val"
    TEST = "test"

    @property
    def folders(self) -> tuple[Folder, Folder]:
        """(seen folder, unseen folder) scored for this split."""
        if self is EvalSplit.VAL:
            return Folder.SEEN_VAL, Folder.UNSEEN_VAL
        return Folder.SEEN_TEST, Folder.UNSEEN_TEST


@dataclass(frozen=True)
class PredictionSet:
    predictions: Mapping[str, float]
    method_name: str = ""
    dataset_name: str = ""
    split: EvalSplit = EvalSplit.TEST

    def __post_init__(self):
        bad = [s for s, v in self.predictions.items() if not math.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite predictions for {bad[:5]}")


@dataclass(frozen=True)
class EvalResult:
    seen_mae: float
    unseen_mae: float
    harmonic: float
    n_seen: int = 0
    n_unseen: int = 0

    @classmethod
    def from_maes(cls, seen: float, unseen: float, n_seen: int = 0, n_unseen: int = 0) -> "EvalResult":
        return cls(seen, unseen, harmonic_mean(seen, unseen), n_seen, n_unseen)

    def to_dict(self) -> dict:
        return {
            "seen_mae": self.seen_mae,
            "unseen_mae": self.unseen_mae,
            "harmonic": self.harmonic,
            "n_seen": self.n_seen,
            "n_unseen": self.n_unseen,
        }


def mae(predictions: PredictionSet | Mapping[str, float], truths: Mapping[str, int], subset) -> float:
    preds = predictions.predictions if isinstance(predictions, PredictionSet) else predictions
    subset = list(subset)
    if not subset:
        raise ValueError("MAE over an empty subset")
    missing = [s for s in subset if s not in preds]
    if missing:
        raise KeyError(f"{len(missing)} sample(s) without a prediction, e.g. {missing[:3]}")
    no_truth = [s for s in subset if s not in truths]
    if no_truth:
        raise KeyError(f"{len(no_truth)} sample(s) without ground truth, e.g. {no_truth[:3]}")
    err = np.array([preds[s] for s in subset], dtype=float) - np.array([truths[s] for s in subset], dtype=float)
    return float(np.mean(np.abs(err)))


def harmonic_mean(seen: float, unseen: float) -> float:
    if seen < 0 or unseen < 0:
        raise ValueError(f"MAEs must be non-negative, got {seen}, {unseen}")
    if seen + unseen == 0:
        return 0.0
    # ratio first so tiny inputs do not underflow through seen * unseen
    return 2.0 * seen * (unseen / (seen + unseen))


def evaluate(predictions: PredictionSet, split: SplitManifest, truths: Mapping[str, int]) -> EvalResult:
    seen_folder, unseen_folder = predictions.split.folders
    seen = split.folder_samples(seen_folder)
    unseen = split.folder_samples(unseen_folder)
    for folder, samples in ((seen_folder, seen), (unseen_folder, unseen)):
        if not samples:
            raise ValueError(f"folder {int(folder)} ({folder.name}) is empty; nothing to score")
    return EvalResult.from_maes(
        mae(predictions, truths, seen), mae(predictions, truths, unseen), len(seen), len(unseen)
    )


def selection_objective(val_result: EvalResult) -> float:
    """Model-selection score under GZSL: the validation harmonic mean."""
    return val_result.harmonic


@dataclass
class AggregateReport:
    methods: list[str]
    datasets: list[str]
    cells: dict[tuple[str, str], EvalResult]
    all_column: dict[str, EvalResult] = field(default_factory=dict)
    mean_row: dict[str, EvalResult] = field(default_factory=dict)
    std_row: dict[str, EvalResult] = field(default_factory=dict)

    def columns(self) -> list[str]:
        return [*self.datasets, "All"]

    def column(self, method: str, col: str) -> EvalResult:
        return self.all_column[method] if col == "All" else self.cells[method, col]

    def to_dict(self) -> dict:
        return {
            "methods": self.methods,
            "datasets": self.datasets,
            "cells": {m: {d: self.cells[m, d].to_dict() for d in self.datasets} for m in self.methods},
            "all": {m: self.all_column[m].to_dict() for m in self.methods},
            "mean": {c: self.mean_row[c].to_dict() for c in self.columns()},
            "std": {c: self.std_row[c].to_dict() for c in self.columns()},
        }


def _triple(values: np.ndarray) -> EvalResult:
    return EvalResult(*map(float, values))


def aggregate(results: Mapping[tuple[str, str], EvalResult]) -> AggregateReport:
    """Per-method ``All`` column plus Mean/Std rows across methods.

    ``All`` averages S, U and H separately over datasets, so its H is the mean
    of per-dataset harmonic means and not the harmonic mean of the averages.
    Std is the population standard deviation.
    """
    if not results:
        raise ValueError("no results to aggregate")
    methods = sorted({m for m, _ in results})
    datasets = sorted({d for _, d in results})
    for m in methods:
        have = {d for mm, d in results if mm == m}
        if have != set(datasets):
            raise ValueError(f"ragged coverage: {m} lacks {sorted(set(datasets) - have)}")

    def smh(r: EvalResult):
        return (r.seen_mae, r.unseen_mae, r.harmonic)

    report = AggregateReport(methods, datasets, dict(results))
    for m in methods:
        grid = np.array([smh(results[m, d]) for d in datasets])
        report.all_column[m] = _triple(grid.mean(axis=0))
    for col in report.columns():
        grid = np.array([smh(report.column(m, col)) for m in methods])
        report.mean_row[col] = _triple(grid.mean(axis=0))
        report.std_row[col] = _triple(grid.std(axis=0, ddof=0))
    return report


def format_aggregate(report: AggregateReport, digits: int = 2) -> str:
    cols = report.columns()
    head1 = ["", *[c for c in cols for _ in range(3)]]
    head2 = ["", *["S", "U", "H"] * len(cols)]
    rows = [head1, head2]

    def fmt(r: EvalResult):
        return [f"{r.seen_mae:.{digits}f}", f"{r.unseen_mae:.{digits}f}", f"{r.harmonic:.{digits}f}"]

    for m in report.methods:
        rows.append([m, *[v for c in cols for v in fmt(report.column(m, c))]])
    rows.append(["Mean", *[v for c in cols for v in fmt(report.mean_row[c])]])
    rows.append(["Std", *[v for c in cols for v in fmt(report.std_row[c])]])
    widths = [max(len(r[i]) for r in rows) for i in range(len(head1))]
    # group labels only over the first of each S/U/H triple
    rows[0] = [rows[0][0]] + [c if i % 3 == 0 else "" for i, c in enumerate(rows[0][1:])]
    lines = ["  ".join([r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]).rstrip()
             for r in rows]
    lines.insert(2, "-" * max(len(x) for x in lines))
    lines.insert(len(lines) - 2, "-" * max(len(x) for x in lines))
    return "\n".join(lines) + "\n"


@dataclass
class DegradationReport:
    per_method: dict[str, dict[str, float]]
    average_pct: float
    max_pct: float
    max_method: str
    extreme_cell: tuple[str, str, float] | None = None

    def to_dict(self) -> dict:
        doc = {
            "per_method": self.per_method,
            "average_pct": self.average_pct,
            "max_pct": self.max_pct,
            "max_method": self.max_method,
        }
        if self.extreme_cell:
            m, d, p = self.extreme_cell
            doc["extreme_cell"] = {"method": m, "dataset": d, "pct": p}
        return doc


def pct_change(supervised: float, gzsl: float) -> float:
    if supervised == 0:
        raise ZeroDivisionError("supervised MAE is 0")
    return 100.0 * (gzsl - supervised) / supervised


def degradation(
    gzsl_all_h: Mapping[str, float],
    supervised_all_mae: Mapping[str, float],
    per_cell: Mapping[tuple[str, str], tuple[float, float]] | None = None,
) -> DegradationReport:
    """Per-method percentage increase of GZSL H over supervised MAE.

    ``per_cell`` maps (method, dataset) to (supervised MAE, GZSL H) and, when
    given, is used to locate the single worst cell.
    """
    if set(gzsl_all_h) != set(supervised_all_mae):
        raise ValueError("GZSL and supervised method sets differ")
    if not gzsl_all_h:
        raise ValueError("no methods")
    per_method = {}
    for m in sorted(gzsl_all_h):
        sup, h = supervised_all_mae[m], gzsl_all_h[m]
        per_method[m] = {"supervised_mae": sup, "gzsl_h": h, "pct": pct_change(sup, h)}
    pcts = {m: v["pct"] for m, v in per_method.items()}
    worst = max(pcts, key=pcts.get)
    extreme = None
    if per_cell:
        cell = max(sorted(per_cell), key=lambda k: pct_change(*per_cell[k]))
        extreme = (cell[0], cell[1], pct_change(*per_cell[cell]))
    return DegradationReport(per_method, float(np.mean(list(pcts.values()))), pcts[worst], worst, extreme)


def format_degradation(report: DegradationReport) -> str:
    lines = [f"{'Method':<12} {'Supervised':>10} {'GZSL H':>8} {'Change':>9}"]
    for m, v in report.per_method.items():
        lines.append(f"{m:<12} {v['supervised_mae']:>10.2f} {v['gzsl_h']:>8.2f} {v['pct']:>+8.1f}%")
    lines.append(f"average {report.average_pct:+.1f}%, max {report.max_pct:+.1f}% ({report.max_method})")
    if report.extreme_cell:
        m, d, p = report.extreme_cell
        lines.append(f"worst cell {m} / {d}: {p:+.1f}%")
    return "\n".join(lines) + "\n"


def read_predictions(source: TextIO | str, **kwargs) -> PredictionSet:
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source)
    if reader.fieldnames is None or not {"sample_id", "predicted_age"} <= set(reader.fieldnames):
        raise ValueError(f"prediction file needs sample_id,predicted_age columns, got {reader.fieldnames}")
    preds: dict[str, float] = {}
    for row_no, row in enumerate(reader, start=1):
        sid = row["sample_id"]
        if sid in preds:
            raise ValueError(f"row {row_no}: duplicate prediction for {sid!r}")
        try:
            preds[sid] = float(row["predicted_age"])
        except ValueError:
            raise ValueError(f"row {row_no}: bad predicted_age {row['predicted_age']!r}") from None
    return PredictionSet(preds, **kwargs)
