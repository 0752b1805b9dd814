import csv
from pathlib import Path

import pytest

from gzsl_age.ingest import AnnotationRecord, DatasetManifest

DATA = Path(__file__).resolve().parent.parent / "data"


def make_manifest(subjects: dict[str, list[int]], name: str = "fixture") -> DatasetManifest:
    records = [
        AnnotationRecord(f"{sid}_{i}", age, sid, f"{sid}/{i}.jpg")
        for sid, ages in subjects.items()
        for i, age in enumerate(ages)
    ]
    return DatasetManifest(name, records)


# F1: 3 minors, 10 adults, 6 elders.
#   s1 minor-only (3), s2 adult-only (8), s3 elder-only (2), s4 mixed (2 adult + 4 elder)
F1_SUBJECTS = {
    "s1": [5, 10, 15],
    "s2": [20, 25, 30, 35, 40, 45, 50, 55],
    "s3": [65, 70],
    "s4": [30, 35, 61, 62, 63, 64],
}


@pytest.fixture
def f1():
    return make_manifest(F1_SUBJECTS, "F1")


@pytest.fixture
def data_dir():
    return DATA


def read_csv(name: str) -> list[dict]:
    with open(DATA / name, newline="") as f:
        return list(csv.DictReader(f))


def printed_gzsl() -> dict[tuple[str, str], tuple[float, float, float]]:
    """(method, dataset) -> printed (S, U, H) from the published GZSL table."""
    return {(r["method"], r["dataset"]): (float(r["seen_mae"]), float(r["unseen_mae"]), float(r["harmonic"]))
            for r in read_csv("gzsl_test_mae.csv")}


def printed_summary() -> dict[str, tuple[float, float, float]]:
    return {r["row"]: (float(r["seen_mae"]), float(r["unseen_mae"]), float(r["harmonic"]))
            for r in read_csv("gzsl_test_mae_summary.csv")}


# One line per acceptance criterion, filled in by test_acceptance and echoed
# at the end of the run so the verdicts survive output capturing.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
