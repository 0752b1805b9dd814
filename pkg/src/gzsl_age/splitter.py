"""Five-folder GZSL split construction.

Folders 0-2 hold seen (adult) train/val/test, folder 3 holds unseen
validation (elders) and folder 4 unseen test (minors). For datasets with
subject identities every subject lives in exactly one folder; images of the
subject outside that folder's age group are discarded.

All targets and running counts are exact rationals so that comparisons and
score ties are decided without floating-point noise.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .ingest import AgeGroup, AgeGroupConfig, DatasetManifest, classify_age

EXCLUSIVITY = "exclusivity"


class Folder(enum.IntEnum):
    SEEN_TRAIN = 0
    SEEN_VAL = 1
    SEEN_TEST = 2
    UNSEEN_VAL = 3
    UNSEEN_TEST = 4

    @property
    def group(self) -> AgeGroup:
        return FOLDER_GROUP[self]

    @property
    def is_seen(self) -> bool:
        return self <= Folder.SEEN_TEST


FOLDER_GROUP = {
    Folder.SEEN_TRAIN: AgeGroup.ADULT,
    Folder.SEEN_VAL: AgeGroup.ADULT,
    Folder.SEEN_TEST: AgeGroup.ADULT,
    Folder.UNSEEN_VAL: AgeGroup.ELDER,
    Folder.UNSEEN_TEST: AgeGroup.MINOR,
}
SEEN_FOLDERS = (Folder.SEEN_TRAIN, Folder.SEEN_VAL, Folder.SEEN_TEST)
UNSEEN_FOLDERS = (Folder.UNSEEN_VAL, Folder.UNSEEN_TEST)


class SplitRole(enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


CANDIDATE_FOLDER = {
    (SplitRole.TRAIN, AgeGroup.ADULT): Folder.SEEN_TRAIN,
    (SplitRole.VAL, AgeGroup.ADULT): Folder.SEEN_VAL,
    (SplitRole.TEST, AgeGroup.ADULT): Folder.SEEN_TEST,
    (SplitRole.VAL, AgeGroup.ELDER): Folder.UNSEEN_VAL,
    (SplitRole.TEST, AgeGroup.MINOR): Folder.UNSEEN_TEST,
}
FOLDER_ROLE = {folder: role for (role, _), folder in CANDIDATE_FOLDER.items()}

# Preference among equal scores: test > val > train, and the unseen folder
# first when both candidates share a split.
MIXED_TIE_ORDER = (
    Folder.UNSEEN_TEST,
    Folder.SEEN_TEST,
    Folder.UNSEEN_VAL,
    Folder.SEEN_VAL,
    Folder.SEEN_TRAIN,
)
# Adult-only fill breaks deficit ties train > val > test.
FILL_TIE_ORDER = SEEN_FOLDERS

Counts = dict[Folder, Fraction]


def _exact(x) -> Fraction:
    # repr() gives the shortest decimal that round-trips, so 0.1 -> 1/10.
    return x if isinstance(x, Fraction) else Fraction(repr(x))


def zero_counts() -> Counts:
    return {k: Fraction(0) for k in Folder}


@dataclass(frozen=True)
class SplitFractions:
    alpha: float = 0.8
    beta: float = 0.1

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1 and self.alpha + self.beta < 1):
            raise ValueError(
                f"need alpha, beta in (0, 1) with alpha + beta < 1, got {self.alpha}, {self.beta}"
            )

    def shares(self) -> tuple[Fraction, Fraction, Fraction]:
        """Exact train/val/test shares of the adult images."""
        a, b = _exact(self.alpha), _exact(self.beta)
        return a, b, 1 - a - b


class SubjectType(enum.Enum):
    MINOR_ONLY = "minor-only"
    ADULT_ONLY = "adult-only"
    ELDER_ONLY = "elder-only"
    MIXED = "mixed"


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    minor_samples: tuple[str, ...] = ()
    adult_samples: tuple[str, ...] = ()
    elder_samples: tuple[str, ...] = ()

    def samples(self, group: AgeGroup) -> tuple[str, ...]:
        if group is AgeGroup.MINOR:
            return self.minor_samples
        if group is AgeGroup.ADULT:
            return self.adult_samples
        return self.elder_samples

    def count(self, group: AgeGroup) -> int:
        return len(self.samples(group))

    @property
    def total(self) -> int:
        return len(self.minor_samples) + len(self.adult_samples) + len(self.elder_samples)

    @cached_property
    def subject_type(self) -> SubjectType:
        present = [g for g in AgeGroup if self.samples(g)]
        if len(present) != 1:
            if not present:
                raise ValueError(f"subject {self.subject_id!r} has no samples")
            return SubjectType.MIXED
        return {
            AgeGroup.MINOR: SubjectType.MINOR_ONLY,
            AgeGroup.ADULT: SubjectType.ADULT_ONLY,
            AgeGroup.ELDER: SubjectType.ELDER_ONLY,
        }[present[0]]


@dataclass(frozen=True)
class CandidateAssignment:
    split: SplitRole
    kept_group: AgeGroup
    n: int

    def __post_init__(self):
        if (self.split, self.kept_group) not in CANDIDATE_FOLDER:
            raise ValueError(f"invalid candidate ({self.split.value}, {self.kept_group.value})")

    @property
    def folder(self) -> Folder:
        return CANDIDATE_FOLDER[self.split, self.kept_group]

    @classmethod
    def for_folder(cls, folder: Folder, n: int) -> "CandidateAssignment":
        return cls(FOLDER_ROLE[folder], folder.group, n)


@dataclass
class SplitManifest:
    assignments: dict[str, Folder]
    discarded: dict[str, str]
    subject_folder: dict[str, Folder] | None
    fractions: SplitFractions = field(default_factory=SplitFractions)
    config: AgeGroupConfig = field(default_factory=AgeGroupConfig)
    seed: int | None = None
    dataset_name: str = ""
    targets: Counts | None = None
    deficits: Counts = field(default_factory=dict)

    def folder_counts(self) -> dict[Folder, int]:
        counts = {k: 0 for k in Folder}
        for folder in self.assignments.values():
            counts[folder] += 1
        return counts

    def folder_samples(self, folder: Folder) -> list[str]:
        return [s for s, f in self.assignments.items() if f == folder]

    def summary(self) -> dict:
        counts = self.folder_counts()
        doc = {
            "dataset": self.dataset_name,
            "counts": {str(int(k)): counts[k] for k in Folder},
            "assigned": len(self.assignments),
            "discarded": len(self.discarded),
            "seed": self.seed,
            "fractions": {"alpha": self.fractions.alpha, "beta": self.fractions.beta},
            "config": {"a_min": self.config.a_min, "a_max": self.config.a_max},
        }
        if self.targets is not None:
            doc["targets"] = {str(int(k)): float(v) for k, v in self.targets.items()}
            doc["achieved"] = {str(int(k)): counts[k] for k in Folder}
            doc["deficits"] = {str(int(k)): float(v) for k, v in self.deficits.items()}
        return doc


def profile_subjects(
    manifest: DatasetManifest, config: AgeGroupConfig = AgeGroupConfig()
) -> list[SubjectProfile]:
    """Group samples per subject and age group, ordered by subject id then sample id."""
    if not manifest.has_subject_ids:
        raise ValueError(f"manifest {manifest.dataset_name!r} lacks subject ids")
    grouped: dict[str, dict[AgeGroup, list[str]]] = {}
    for rec in manifest.records:
        groups = grouped.get(rec.subject_id)
        if groups is None:
            groups = grouped[rec.subject_id] = {g: [] for g in AgeGroup}
        groups[classify_age(rec.age, config)].append(rec.sample_id)
    return [
        SubjectProfile(
            subject_id=sid,
            minor_samples=tuple(sorted(g[AgeGroup.MINOR])),
            adult_samples=tuple(sorted(g[AgeGroup.ADULT])),
            elder_samples=tuple(sorted(g[AgeGroup.ELDER])),
        )
        for sid, g in sorted(grouped.items())
    ]


def compute_targets(
    manifest: DatasetManifest,
    config: AgeGroupConfig = AgeGroupConfig(),
    fractions: SplitFractions = SplitFractions(),
) -> Counts:
    """Folder sizes under a free, identity-blind placement of every image."""
    n = {g: 0 for g in AgeGroup}
    for rec in manifest.records:
        n[classify_age(rec.age, config)] += 1
    return _targets_from_totals(n[AgeGroup.MINOR], n[AgeGroup.ADULT], n[AgeGroup.ELDER], fractions)


def _targets_from_totals(minors: int, adults: int, elders: int, fractions: SplitFractions) -> Counts:
    a, b, c = fractions.shares()
    return {
        Folder.SEEN_TRAIN: a * adults,
        Folder.SEEN_VAL: b * adults,
        Folder.SEEN_TEST: c * adults,
        Folder.UNSEEN_VAL: Fraction(elders),
        Folder.UNSEEN_TEST: Fraction(minors),
    }


def init_counts(profiles: Iterable[SubjectProfile], fractions: SplitFractions = SplitFractions()) -> Counts:
    """Running counts before the mixed pass.

    Single-group subjects contribute to their only folder; adult-only subjects
    are spread provisionally over folders 0-2 by the split fractions.
    """
    counts = zero_counts()
    shares = fractions.shares()
    for p in profiles:
        kind = p.subject_type
        if kind is SubjectType.MINOR_ONLY:
            counts[Folder.UNSEEN_TEST] += p.total
        elif kind is SubjectType.ELDER_ONLY:
            counts[Folder.UNSEEN_VAL] += p.total
        elif kind is SubjectType.ADULT_ONLY:
            for folder, share in zip(SEEN_FOLDERS, shares):
                counts[folder] += share * p.total
    return counts


def score_candidate(c: CandidateAssignment, targets: Mapping[Folder, Fraction], counts: Mapping[Folder, Fraction]) -> Fraction:
    folder = c.folder
    t = targets[folder]
    gap = t - counts[folder]
    if t <= 0 or gap <= 0:
        return Fraction(0)
    return c.n * gap / (t * t)


def candidates(profile: SubjectProfile) -> list[CandidateAssignment]:
    """Candidate placements keeping a non-empty group, in tie-break order."""
    return [
        CandidateAssignment.for_folder(k, profile.count(k.group))
        for k in MIXED_TIE_ORDER
        if profile.count(k.group) > 0
    ]


def choose_candidate(
    profile: SubjectProfile, targets: Mapping[Folder, Fraction], counts: Mapping[Folder, Fraction]
) -> tuple[CandidateAssignment, list[tuple[CandidateAssignment, Fraction]]]:
    scored = [(c, score_candidate(c, targets, counts)) for c in candidates(profile)]
    # max() keeps the first maximum, and candidates() is already in tie-break order.
    best = max(scored, key=lambda cs: cs[1])[0]
    return best, scored


def _mixed_order(profiles: Iterable[SubjectProfile]) -> list[SubjectProfile]:
    mixed = [p for p in profiles if p.subject_type is SubjectType.MIXED]
    return sorted(mixed, key=lambda p: (-p.total, p.subject_id))


def assign_mixed(
    profiles: Sequence[SubjectProfile],
    targets: Mapping[Folder, Fraction],
    counts: Mapping[Folder, Fraction],
) -> tuple[dict[str, Folder], Counts]:
    """Greedy pass: place each mixed subject on its best-scoring candidate folder."""
    counts = dict(counts)
    placed: dict[str, Folder] = {}
    for p in _mixed_order(profiles):
        best, _ = choose_candidate(p, targets, counts)
        placed[p.subject_id] = best.folder
        counts[best.folder] += best.n
    return placed, counts


def correction_sweep(
    subject_folder: Mapping[str, Folder],
    profiles: Sequence[SubjectProfile],
    targets: Mapping[Folder, Fraction],
    counts: Mapping[Folder, Fraction],
) -> tuple[dict[str, Folder], Counts, Counts]:
    """Move mixed subjects parked in seen folders into under-filled unseen folders.

    Returns the updated placement, counts and the remaining per-folder deficit
    of the unseen folders (zero where the target was reached).
    """
    placed = dict(subject_folder)
    counts = dict(counts)
    by_id = {p.subject_id: p for p in profiles}
    deficits: Counts = {}
    for k in UNSEEN_FOLDERS:
        if counts[k] < targets[k]:
            pool = [
                by_id[sid]
                for sid, folder in placed.items()
                if folder.is_seen and by_id[sid].count(k.group) > 0
            ]
            pool.sort(key=lambda p: (-p.count(k.group), p.subject_id))
            for p in pool:
                if counts[k] >= targets[k]:
                    break
                old = placed[p.subject_id]
                counts[old] -= p.count(old.group)
                counts[k] += p.count(k.group)
                placed[p.subject_id] = k
        deficits[k] = max(Fraction(0), targets[k] - counts[k])
    return placed, counts, deficits


def fill_adult_only(
    profiles: Sequence[SubjectProfile],
    targets: Mapping[Folder, Fraction],
    counts: Mapping[Folder, Fraction],
    fractions: SplitFractions = SplitFractions(),
) -> tuple[dict[str, Folder], Counts]:
    """Distribute adult-only subjects over folders 0-2, largest subject first.

    ``counts`` still holds the provisional adult-only share from
    :func:`init_counts`; it is removed before residual deficits are formed.
    Each subject goes to the seen folder with the largest remaining deficit.
    """
    adult_only = [p for p in profiles if p.subject_type is SubjectType.ADULT_ONLY]
    counts = dict(counts)
    shares = fractions.shares()
    total = sum(p.total for p in adult_only)
    for folder, share in zip(SEEN_FOLDERS, shares):
        counts[folder] -= share * total

    deficit = {k: max(Fraction(0), targets[k] - counts[k]) for k in SEEN_FOLDERS}
    placed: dict[str, Folder] = {}
    for p in sorted(adult_only, key=lambda p: (-p.total, p.subject_id)):
        k = max(FILL_TIE_ORDER, key=lambda f: deficit[f])
        placed[p.subject_id] = k
        deficit[k] = max(Fraction(0), deficit[k] - p.total)
        counts[k] += p.total
    return placed, counts


def _materialize(
    profiles: Sequence[SubjectProfile], subject_folder: Mapping[str, Folder]
) -> tuple[dict[str, Folder], dict[str, str]]:
    assignments: dict[str, Folder] = {}
    discarded: dict[str, str] = {}
    for p in profiles:
        folder = subject_folder[p.subject_id]
        for group in AgeGroup:
            for sample in p.samples(group):
                if group is folder.group:
                    assignments[sample] = folder
                else:
                    discarded[sample] = EXCLUSIVITY
    return assignments, discarded


def split_with_ids(
    manifest: DatasetManifest,
    config: AgeGroupConfig = AgeGroupConfig(),
    fractions: SplitFractions = SplitFractions(),
) -> SplitManifest:
    """Subject-age-exclusive split of a face-filtered, identity-annotated manifest."""
    profiles = profile_subjects(manifest, config)
    targets = compute_targets(manifest, config, fractions)
    counts = init_counts(profiles, fractions)

    placed: dict[str, Folder] = {}
    for p in profiles:
        if p.subject_type is SubjectType.MINOR_ONLY:
            placed[p.subject_id] = Folder.UNSEEN_TEST
        elif p.subject_type is SubjectType.ELDER_ONLY:
            placed[p.subject_id] = Folder.UNSEEN_VAL

    mixed, counts = assign_mixed(profiles, targets, counts)
    mixed, counts, deficits = correction_sweep(mixed, profiles, targets, counts)
    adults, counts = fill_adult_only(profiles, targets, counts, fractions)
    placed.update(mixed)
    placed.update(adults)

    subject_folder = {p.subject_id: placed[p.subject_id] for p in profiles}
    assignments, discarded = _materialize(profiles, subject_folder)
    return SplitManifest(
        assignments=assignments,
        discarded=discarded,
        subject_folder=subject_folder,
        fractions=fractions,
        config=config,
        dataset_name=manifest.dataset_name,
        targets=targets,
        deficits=deficits,
    )


def largest_remainder(total: int, shares: Sequence[Fraction]) -> list[int]:
    """Apportion ``total`` items by ``shares``; remainder ties go to the earlier share."""
    if sum(shares) != 1:
        raise ValueError(f"shares must sum to 1, got {sum(shares)}")
    quotas = [total * s for s in shares]
    seats = [int(q) for q in quotas]
    left = total - sum(seats)
    order = sorted(range(len(shares)), key=lambda i: (-(quotas[i] - seats[i]), i))
    for i in order[:left]:
        seats[i] += 1
    return seats


def split_without_ids(
    manifest: DatasetManifest,
    config: AgeGroupConfig = AgeGroupConfig(),
    fractions: SplitFractions = SplitFractions(),
    seed: int = 0,
) -> SplitManifest:
    """Age-based split for datasets without identities; adults are shuffled with ``seed``."""
    assignments: dict[str, Folder] = {}
    adults = []
    for rec in manifest.records:
        group = classify_age(rec.age, config)
        if group is AgeGroup.MINOR:
            assignments[rec.sample_id] = Folder.UNSEEN_TEST
        elif group is AgeGroup.ELDER:
            assignments[rec.sample_id] = Folder.UNSEEN_VAL
        else:
            adults.append(rec.sample_id)

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(adults))
    sizes = largest_remainder(len(adults), fractions.shares())
    bounds = np.cumsum([0, *sizes])
    for folder, lo, hi in zip(SEEN_FOLDERS, bounds[:-1], bounds[1:]):
        for i in order[lo:hi]:
            assignments[adults[i]] = folder

    return SplitManifest(
        assignments=assignments,
        discarded={},
        subject_folder=None,
        fractions=fractions,
        config=config,
        seed=seed,
        dataset_name=manifest.dataset_name,
        targets=compute_targets(manifest, config, fractions),
        deficits={k: Fraction(0) for k in UNSEEN_FOLDERS},
    )


def build_split(
    manifest: DatasetManifest,
    config: AgeGroupConfig = AgeGroupConfig(),
    fractions: SplitFractions = SplitFractions(),
    seed: int = 0,
) -> SplitManifest:
    if manifest.has_subject_ids:
        return split_with_ids(manifest, config, fractions)
    return split_without_ids(manifest, config, fractions, seed)


SPLIT_COLUMNS = ("sample_id", "folder", "status", "reason")


def write_split(split: SplitManifest, out: TextIO) -> None:
    rows = [(s, str(int(f)), "assigned", "") for s, f in split.assignments.items()]
    rows += [(s, "", "discarded", reason) for s, reason in split.discarded.items()]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SPLIT_COLUMNS)
    writer.writerows(sorted(rows))


def split_to_csv(split: SplitManifest) -> str:
    buf = io.StringIO()
    write_split(split, buf)
    return buf.getvalue()


def read_split(source: TextIO | str, summary: Mapping | None = None) -> SplitManifest:
    """Load a split table; ``summary`` (the JSON document) restores the run parameters."""
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source)
    if reader.fieldnames is None or set(SPLIT_COLUMNS) - set(reader.fieldnames):
        raise ValueError(f"split table must have columns {SPLIT_COLUMNS}, got {reader.fieldnames}")
    assignments: dict[str, Folder] = {}
    discarded: dict[str, str] = {}
    for row_no, row in enumerate(reader, start=1):
        status = row["status"].strip()
        if status == "assigned":
            try:
                assignments[row["sample_id"]] = Folder(int(row["folder"]))
            except ValueError:
                raise ValueError(f"row {row_no}: bad folder {row['folder']!r}") from None
        elif status == "discarded":
            discarded[row["sample_id"]] = row["reason"]
        else:
            raise ValueError(f"row {row_no}: unknown status {status!r}")

    kwargs = {}
    if summary:
        kwargs = dict(
            fractions=SplitFractions(**summary["fractions"]),
            config=AgeGroupConfig(**summary["config"]),
            seed=summary.get("seed"),
            dataset_name=summary.get("dataset", ""),
        )
    return SplitManifest(assignments=assignments, discarded=discarded, subject_folder=None, **kwargs)


def summary_json(split: SplitManifest, extra: Mapping | None = None) -> str:
    doc = split.summary()
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
