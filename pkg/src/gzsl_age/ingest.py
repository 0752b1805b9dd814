"""Annotation manifests: parsing, face filtering, age groups and histograms."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import BinaryIO, Iterable, TextIO

MIN_AGE = 0
MAX_AGE = 130

REQUIRED_COLUMNS = ("sample_id", "age", "face_ok")
MANIFEST_COLUMNS = ("sample_id", "subject_id", "age", "image_ref", "face_ok")

_TRUE = {"1", "true"}
_FALSE = {"0", "false"}


class ManifestError(ValueError):
    """Raised for malformed manifest input. ``row`` is the 1-based data row, when known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class AgeGroup(enum.Enum):
    MINOR = "minor"
    ADULT = "adult"
    ELDER = "elder"


@dataclass(frozen=True)
class AgeGroupConfig:
    """Adult range ``[a_min, a_max)``; younger is minor, ``a_max`` and above is elder."""

    a_min: int = 18
    a_max: int = 60

    def __post_init__(self):
        if not (0 < self.a_min < self.a_max):
            raise ValueError(f"need 0 < a_min < a_max, got a_min={self.a_min}, a_max={self.a_max}")


@dataclass(frozen=True)
class AnnotationRecord:
    sample_id: str
    age: int
    subject_id: str | None = None
    image_ref: str = ""
    face_ok: bool = True

    def __post_init__(self):
        if not (MIN_AGE <= self.age <= MAX_AGE):
            raise ValueError(f"age {self.age} outside [{MIN_AGE}, {MAX_AGE}]")


@dataclass(frozen=True)
class DatasetManifest:
    dataset_name: str
    records: tuple[AnnotationRecord, ...] = ()
    # Tracks whether the source table had a subject_id column at all; an empty
    # manifest from a table with the column still counts as identity-annotated.
    subject_column: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen: set[str] = set()
        for i, rec in enumerate(self.records, start=1):
            if rec.sample_id in seen:
                raise ManifestError(f"duplicate sample_id {rec.sample_id!r}", row=i)
            seen.add(rec.sample_id)

    @property
    def has_subject_ids(self) -> bool:
        return self.subject_column and all(r.subject_id is not None for r in self.records)

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self) -> dict[str, AnnotationRecord]:
        return {r.sample_id: r for r in self.records}


@dataclass(frozen=True)
class FilterStats:
    available: int
    filtered_exclusivity: int = 0
    filtered_no_face: int = 0
    selected: int | None = None

    def __post_init__(self):
        expected = self.available - self.filtered_exclusivity - self.filtered_no_face
        if self.selected is None:
            object.__setattr__(self, "selected", expected)
        elif self.selected != expected:
            raise ValueError(
                f"inconsistent filter counts: {self.available} - {self.filtered_exclusivity}"
                f" - {self.filtered_no_face} = {expected}, not {self.selected}"
            )
        if min(self.available, self.filtered_exclusivity, self.filtered_no_face) < 0 or expected < 0:
            raise ValueError("filter counts must be non-negative")


def classify_age(age: int, config: AgeGroupConfig = AgeGroupConfig()) -> AgeGroup:
    if age < config.a_min:
        return AgeGroup.MINOR
    if age < config.a_max:
        return AgeGroup.ADULT
    return AgeGroup.ELDER


def _parse_bool(value: str, row: int) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ManifestError(f"face_ok must be one of 0/1/true/false, got {value!r}", row=row)


def _parse_age(value: str, row: int) -> int:
    try:
        age = int(value.strip())
    except ValueError:
        raise ManifestError(f"age must be an integer, got {value!r}", row=row) from None
    if not (MIN_AGE <= age <= MAX_AGE):
        raise ManifestError(f"age {age} outside [{MIN_AGE}, {MAX_AGE}]", row=row)
    return age


def _text(source: BinaryIO | TextIO | bytes | str) -> TextIO:
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8-sig"), newline="")
    if isinstance(source, str):
        return io.StringIO(source, newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def parse_manifest(source: BinaryIO | TextIO | bytes | str, dataset_name: str) -> DatasetManifest:
    """Parse a comma-separated annotation table into a :class:`DatasetManifest`.

    The header must name ``sample_id``, ``age`` and ``face_ok``; ``subject_id``
    and ``image_ref`` are optional. An empty ``subject_id`` cell means the
    record has no identity.
    """
    reader = csv.reader(_text(source))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ManifestError("empty input, expected a header row") from None
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise ManifestError(f"header is missing required column(s) {missing}: {header}")
    if len(set(header)) != len(header):
        raise ManifestError(f"header has duplicate columns: {header}")
    col = {name: i for i, name in enumerate(header)}

    records = []
    seen: set[str] = set()
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ManifestError(f"expected {len(header)} fields, got {len(row)}", row=row_no)
        sample_id = row[col["sample_id"]].strip()
        if not sample_id:
            raise ManifestError("empty sample_id", row=row_no)
        if sample_id in seen:
            raise ManifestError(f"duplicate sample_id {sample_id!r}", row=row_no)
        seen.add(sample_id)
        subject = row[col["subject_id"]].strip() if "subject_id" in col else ""
        records.append(
            AnnotationRecord(
                sample_id=sample_id,
                age=_parse_age(row[col["age"]], row_no),
                subject_id=subject or None,
                image_ref=row[col["image_ref"]] if "image_ref" in col else "",
                face_ok=_parse_bool(row[col["face_ok"]], row_no),
            )
        )
    return DatasetManifest(dataset_name, tuple(records), subject_column="subject_id" in col)


def read_manifest(path, dataset_name: str | None = None) -> DatasetManifest:
    path = Path(path)
    with path.open("rb") as f:
        return parse_manifest(f, dataset_name or path.stem)


def write_manifest(manifest: DatasetManifest, out: TextIO) -> None:
    columns = [c for c in MANIFEST_COLUMNS if c != "subject_id" or manifest.subject_column]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for r in manifest.records:
        row = {
            "sample_id": r.sample_id,
            "subject_id": r.subject_id or "",
            "age": r.age,
            "image_ref": r.image_ref,
            "face_ok": int(r.face_ok),
        }
        writer.writerow([row[c] for c in columns])


def manifest_to_csv(manifest: DatasetManifest) -> str:
    buf = io.StringIO()
    write_manifest(manifest, buf)
    return buf.getvalue()


def filter_no_face(manifest: DatasetManifest) -> tuple[DatasetManifest, FilterStats]:
    kept = tuple(r for r in manifest.records if r.face_ok)
    removed = len(manifest.records) - len(kept)
    stats = FilterStats(available=len(manifest.records), filtered_no_face=removed)
    return replace(manifest, records=kept), stats


def histogram(ages: DatasetManifest | Iterable[int], bin_width: int = 1) -> list[tuple[int, int]]:
    """Count ages into ``[start, start + bin_width)`` bins, ascending.

    Bin edges are anchored at 0. Output runs from the lowest occupied bin to
    the highest; empty bins in between are kept with count 0.
    """
    if bin_width < 1:
        raise ValueError(f"bin_width must be >= 1, got {bin_width}")
    if isinstance(ages, DatasetManifest):
        ages = [r.age for r in ages.records]
    counts: dict[int, int] = {}
    for a in ages:
        start = (a // bin_width) * bin_width
        counts[start] = counts.get(start, 0) + 1
    if not counts:
        return []
    lo, hi = min(counts), max(counts)
    return [(s, counts.get(s, 0)) for s in range(lo, hi + 1, bin_width)]


def write_histogram(bins: list[tuple[int, int]], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["bin_start", "count"])
    writer.writerows(bins)
