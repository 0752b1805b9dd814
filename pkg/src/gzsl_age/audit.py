"""Invariant checks on a split plus the filtering and split-statistics reports."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

from .ingest import AgeGroupConfig, DatasetManifest, FilterStats, classify_age
from .splitter import Folder, SplitManifest


class ViolationKind(enum.Enum):
    AGE_OUT_OF_RANGE = "AgeOutOfRange"
    SUBJECT_IN_MULTIPLE_FOLDERS = "SubjectInMultipleFolders"
    SAMPLE_BOTH_ASSIGNED_AND_DISCARDED = "SampleBothAssignedAndDiscarded"
    UNKNOWN_SAMPLE = "UnknownSample"
    MISSING_SAMPLE = "MissingSample"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    detail: str
    subject_id: str | None = None
    sample_id: str | None = None

    def __post_init__(self):
        if self.subject_id is None and self.sample_id is None:
            raise ValueError("a violation must name a subject or a sample")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "subject_id": self.subject_id,
            "sample_id": self.sample_id,
            "detail": self.detail,
        }


def verify(
    split: SplitManifest, source: DatasetManifest, config: AgeGroupConfig | None = None
) -> list[Violation]:
    """Check a split against the (face-filtered) manifest it was built from.

    Every broken invariant is reported independently; an empty list means the
    split is valid. Subjects must occupy a single folder, which covers the
    seen/unseen separation inside each evaluation split as well.
    """
    config = config or split.config
    records = source.by_id()
    out: list[Violation] = []

    for sid in split.assignments.keys() & split.discarded.keys():
        out.append(Violation(ViolationKind.SAMPLE_BOTH_ASSIGNED_AND_DISCARDED,
                             "sample is both assigned and discarded", sample_id=sid))
    for sid in (split.assignments.keys() | split.discarded.keys()) - records.keys():
        out.append(Violation(ViolationKind.UNKNOWN_SAMPLE, "sample not in source manifest", sample_id=sid))
    for sid in records.keys() - split.assignments.keys() - split.discarded.keys():
        out.append(Violation(ViolationKind.MISSING_SAMPLE, "source sample neither assigned nor discarded",
                             subject_id=records[sid].subject_id, sample_id=sid))

    for sid, folder in split.assignments.items():
        rec = records.get(sid)
        if rec is None:
            continue
        group = classify_age(rec.age, config)
        if group is not folder.group:
            out.append(Violation(
                ViolationKind.AGE_OUT_OF_RANGE,
                f"age {rec.age} ({group.value}) placed in folder {int(folder)} ({folder.group.value} only)",
                subject_id=rec.subject_id, sample_id=sid,
            ))

    if source.has_subject_ids:
        folders: dict[str, set[Folder]] = {}
        for sid, folder in split.assignments.items():
            rec = records.get(sid)
            if rec is not None:
                folders.setdefault(rec.subject_id, set()).add(folder)
        recorded = split.subject_folder or {}
        for subject, fs in folders.items():
            if subject in recorded:
                fs = fs | {recorded[subject]}
            if len(fs) > 1:
                out.append(Violation(
                    ViolationKind.SUBJECT_IN_MULTIPLE_FOLDERS,
                    f"subject spans folders {sorted(int(f) for f in fs)}",
                    subject_id=subject,
                ))

    out.sort(key=lambda v: (v.kind.value, v.subject_id or "", v.sample_id or ""))
    return out


def round_pct(count: int, total: int) -> float:
    """``100 * count / total`` rounded half away from zero to 2 decimals (0 when total is 0)."""
    if total == 0:
        return 0.0
    pct = Decimal(100 * count) / Decimal(total)
    return float(pct.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class SplitStats:
    counts: dict[Folder, int]
    percentages: dict[Folder, float]
    total: int
    discarded: int = 0

    def to_dict(self) -> dict:
        return {
            "counts": {str(int(k)): v for k, v in self.counts.items()},
            "percentages": {str(int(k)): v for k, v in self.percentages.items()},
            "total": self.total,
            "discarded": self.discarded,
        }


def split_stats(split: SplitManifest | Mapping[Folder, int]) -> SplitStats:
    if isinstance(split, SplitManifest):
        counts, discarded = split.folder_counts(), len(split.discarded)
    else:
        counts, discarded = {k: int(split.get(k, 0)) for k in Folder}, 0
    total = sum(counts.values())
    return SplitStats(
        counts=counts,
        percentages={k: round_pct(c, total) for k, c in counts.items()},
        total=total,
        discarded=discarded,
    )


# Column order used by the printed split table: train, val seen/unseen, test seen/unseen.
TABLE_FOLDER_ORDER = (Folder.SEEN_TRAIN, Folder.SEEN_VAL, Folder.UNSEEN_VAL, Folder.SEEN_TEST, Folder.UNSEEN_TEST)
SPLIT_TABLE_COLUMNS = ("train", "seen_val", "unseen_val", "seen_test", "unseen_test")


def format_split_table(stats: Mapping[str, SplitStats]) -> str:
    header = ["Dataset", "Train", "Val seen", "Val unseen", "Test seen", "Test unseen", "Total"]
    rows = []
    for name in sorted(stats):
        s = stats[name]
        rows.append([name] + [f"{s.counts[k]:,} ({s.percentages[k]:.2f}%)" for k in TABLE_FOLDER_ORDER]
                    + [f"{s.total:,}"])
    return _align([header] + rows)


def filter_report(stats: Mapping[str, FilterStats]) -> list[dict]:
    """One row per dataset; ``Selected`` is recomputed and must match any stored value."""
    rows = []
    for name in sorted(stats):
        s = stats[name]
        selected = s.available - s.filtered_exclusivity - s.filtered_no_face
        if selected != s.selected or selected < 0:
            raise ValueError(f"{name}: selected {s.selected} != {s.available} - "
                             f"{s.filtered_exclusivity} - {s.filtered_no_face}")
        rows.append({
            "dataset": name,
            "available": s.available,
            "exclusivity": s.filtered_exclusivity,
            "no_face": s.filtered_no_face,
            "selected": selected,
        })
    return rows


def format_filter_table(rows: Sequence[Mapping]) -> str:
    header = ["Dataset", "Available", "Exclusivity", "No faces", "Selected"]
    body = [[r["dataset"]] + [f"{r[k]:,}" for k in ("available", "exclusivity", "no_face", "selected")]
            for r in rows]
    return _align([header] + body)


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for j, r in enumerate(rows):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines) + "\n"
