"""Split construction, auditing and scoring for age estimation without minors in training."""

from .ingest import AgeGroup, AgeGroupConfig, AnnotationRecord, DatasetManifest, FilterStats, classify_age
from .splitter import Folder, SplitFractions, SplitManifest, build_split, split_with_ids, split_without_ids

__all__ = [
    "AgeGroup",
    "AgeGroupConfig",
    "AnnotationRecord",
    "DatasetManifest",
    "FilterStats",
    "Folder",
    "SplitFractions",
    "SplitManifest",
    "build_split",
    "classify_age",
    "split_with_ids",
    "split_without_ids",
]
__version__ = "0.1.0"
