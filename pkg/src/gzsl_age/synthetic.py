"""Random annotation manifests for property tests and demo runs."""

from __future__ import annotations

import numpy as np

from .ingest import AgeGroupConfig, AnnotationRecord, DatasetManifest


def _group_bounds(config: AgeGroupConfig, max_age: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([0, config.a_min, config.a_max])
    hi = np.array([config.a_min - 1, config.a_max - 1, max_age])
    return lo, hi


def random_manifest(
    rng: np.random.Generator | int,
    n_subjects: int,
    mixed_fraction: float = 0.3,
    max_images: int = 8,
    with_ids: bool = True,
    config: AgeGroupConfig = AgeGroupConfig(),
    max_age: int = 101,
    name: str = "synthetic",
) -> DatasetManifest:
    """Manifest of ``n_subjects`` identities with 1..max_images images each.

    A ``mixed_fraction`` share of subjects (in expectation) spans two or three
    age groups; the rest stay in one group. Adult-only subjects are the most
    common single-group type, as in real face datasets.
    """
    rng = np.random.default_rng(rng)
    lo, hi = _group_bounds(config, max_age)
    records = []
    for s in range(n_subjects):
        sid = f"s{s:04d}"
        n = int(rng.integers(1, max_images + 1))
        if n >= 2 and rng.random() < mixed_fraction:
            k = int(rng.integers(2, min(3, n) + 1))
            chosen = rng.permutation(3)[:k]
            # every chosen group gets at least one image
            picks = np.concatenate([chosen, chosen[rng.integers(0, k, size=n - k)]])
        else:
            picks = np.full(n, int(rng.choice(3, p=[0.2, 0.6, 0.2])))
        ages = rng.integers(lo[picks], hi[picks] + 1)
        for j, age in enumerate(ages.tolist()):
            records.append(
                AnnotationRecord(
                    sample_id=f"{sid}_{j:03d}",
                    age=age,
                    subject_id=sid if with_ids else None,
                    image_ref=f"img/{sid}_{j:03d}.jpg",
                )
            )
    return DatasetManifest(name, tuple(records), subject_column=with_ids)
