"""
Dataset Manifest
================

JSON manifests listing cases, their clip containers and split membership.
Clip paths inside a manifest are relative to the manifest's directory.
"""

import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Set, Union

from pydantic import ValidationError

from ..config import SCHEMA_VERSION, Split
from ..common.exceptions import MissingArtifact, ParseError, SplitOverlap, wrap_exception
from ..domain.models import CaseEntry, CaseRecord, DatasetManifest
from .clip_store import load_clip

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def validate_disjoint(records: Iterable[CaseEntry]) -> None:
    """
    Check that no case (or conditioning case, for synthetic rows) spans two splits.

    Raises:
        SplitOverlap: With the offending case ids
    """
    splits_by_case: Dict[str, Set[Split]] = defaultdict(set)
    for record in records:
        splits_by_case[record.group_id].add(record.split)
    overlapping = [case_id for case_id, splits in splits_by_case.items() if len(splits) > 1]
    if overlapping:
        raise SplitOverlap(overlapping)


def make_manifest(records: Iterable[CaseEntry], split_seed: int = 0) -> DatasetManifest:
    """Build a manifest after validating split disjointness."""
    records = tuple(records)
    validate_disjoint(records)
    return DatasetManifest(split_seed=split_seed, records=records)


def save_manifest(manifest: DatasetManifest, path: PathLike) -> Path:
    """
    Write a manifest as indented, key-sorted JSON.

    Raises:
        SplitOverlap: If the manifest's splits are not disjoint
    """
    validate_disjoint(manifest.records)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = manifest.model_dump(mode="json")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Saved manifest with {len(manifest.records)} record(s) to {path}")
    return path


def load_manifest(path: PathLike) -> DatasetManifest:
    """
    Read and validate a manifest.

    Raises:
        MissingArtifact: If the file does not exist
        ParseError: If the file is not a valid manifest
        SplitOverlap: If a case id appears in more than one split
    """
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(str(path))
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise wrap_exception(e, f"Manifest is not valid JSON: {path}", ParseError)

    if not isinstance(payload, dict):
        raise ParseError(f"Manifest must be a JSON object: {path}")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(
            f"Unsupported manifest schema_version {version!r}",
            {"path": str(path), "expected": SCHEMA_VERSION},
        )
    try:
        manifest = DatasetManifest.model_validate(payload)
    except ValidationError as e:
        raise wrap_exception(e, f"Invalid manifest: {path}", ParseError)

    validate_disjoint(manifest.records)
    return manifest


def resolve_path(manifest_path: PathLike, relative: str) -> Path:
    """Resolve a clip path stored in a manifest against the manifest's directory."""
    return Path(manifest_path).parent / relative


def load_case(entry: CaseEntry, manifest_path: PathLike) -> CaseRecord:
    """Load both clips of a manifest entry into memory."""
    a4c = load_clip(resolve_path(manifest_path, entry.a4c_path))
    a2c = load_clip(resolve_path(manifest_path, entry.a2c_path)) if entry.a2c_path else None
    return CaseRecord(
        a4c=a4c,
        a2c=a2c,
        ef_true=entry.ef_true,
        split=entry.split,
        provenance=entry.provenance,
    )


def load_cases(manifest: DatasetManifest, manifest_path: PathLike, split: Split) -> List[CaseRecord]:
    """Load every case of one split in manifest order."""
    return [load_case(entry, manifest_path) for entry in manifest.by_split(split)]


__all__ = [
    'validate_disjoint',
    'make_manifest',
    'save_manifest',
    'load_manifest',
    'resolve_path',
    'load_case',
    'load_cases',
]
