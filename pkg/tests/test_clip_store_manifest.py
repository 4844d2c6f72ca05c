"""
Clip containers, sidecars and dataset manifests.
"""

import json

import numpy as np
import pytest

from echosynth.config import Provenance, Split, View
from echosynth.common.exceptions import MissingArtifact, ParseError, SplitOverlap
from echosynth.data.clip_store import (
    load_clip,
    load_clip_metadata,
    read_array,
    save_clip,
    write_array,
)
from echosynth.data.manifest import load_cases, load_manifest, make_manifest, save_manifest
from echosynth.domain.models import CaseEntry, DatasetManifest

from .conftest import random_clip


def entry(case_id, split, provenance=Provenance.PHANTOM, source=None, ef=50.0):
    return CaseEntry(
        case_id=case_id,
        a4c_path=f"clips/{case_id}_a4c.clip",
        a2c_path=f"clips/{case_id}_a2c.clip",
        ef_true=ef,
        split=split,
        provenance=provenance,
        source_case_id=source,
    )


def test_clip_container_is_bit_exact(tmp_path):
    clip = random_clip(1, View.A2C, "c1")
    path = save_clip(clip, tmp_path / "c1_a2c", Provenance.SYNTHETIC, {"seed": 7})
    assert path.suffix == ".clip"
    loaded = load_clip(path)
    assert loaded.frames.tobytes() == clip.frames.tobytes()
    assert loaded.view == View.A2C
    assert loaded.case_id == "c1"
    metadata = load_clip_metadata(path)
    assert metadata.provenance == Provenance.SYNTHETIC
    assert metadata.extra == {"seed": 7}


def test_read_array_rejects_bad_files(tmp_path):
    with pytest.raises(MissingArtifact):
        read_array(tmp_path / "absent.clip")

    garbage = tmp_path / "garbage.clip"
    garbage.write_bytes(b"not a container at all")
    with pytest.raises(ParseError):
        read_array(garbage)

    truncated = tmp_path / "truncated.clip"
    write_array(np.zeros((2, 3), dtype=np.float32), truncated)
    truncated.write_bytes(truncated.read_bytes()[:-4])
    with pytest.raises(ParseError):
        read_array(truncated)


def test_load_clip_needs_sidecar(tmp_path):
    path = tmp_path / "orphan.clip"
    write_array(np.zeros((16, 1, 64, 64), dtype=np.float32), path)
    with pytest.raises(MissingArtifact):
        load_clip(path)


def test_manifest_counts_and_lookup():
    manifest = make_manifest([
        entry("a", Split.TRAIN), entry("b", Split.TRAIN), entry("c", Split.VAL), entry("d", Split.TEST),
    ])
    assert manifest.counts == {"train": 2, "val": 1, "test": 1}
    assert manifest.case_ids(Split.TRAIN) == ["a", "b"]
    assert [e.case_id for e in manifest.by_split(Split.TEST)] == ["d"]


def test_split_overlap_is_rejected():
    with pytest.raises(SplitOverlap):
        make_manifest([entry("a", Split.TRAIN), entry("a", Split.TEST)])
    # a synthetic row belongs to its conditioning case
    with pytest.raises(SplitOverlap):
        make_manifest([
            entry("a", Split.VAL),
            entry("a__synth00", Split.TRAIN, Provenance.SYNTHETIC, source="a"),
        ])


def test_counts_must_match_records():
    with pytest.raises(ValueError):
        DatasetManifest(records=(entry("a", Split.TRAIN),), counts={"train": 2, "val": 0, "test": 0})


def test_manifest_file_round_trip(tmp_path):
    manifest = make_manifest([entry("a", Split.TRAIN), entry("b", Split.TEST)], split_seed=4)
    path = save_manifest(manifest, tmp_path / "manifest.json")
    assert load_manifest(path) == manifest


def test_load_manifest_errors(tmp_path):
    with pytest.raises(MissingArtifact):
        load_manifest(tmp_path / "missing.json")

    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ParseError):
        load_manifest(broken)

    future = tmp_path / "future.json"
    future.write_text(json.dumps({"schema_version": 99, "records": []}), encoding="utf-8")
    with pytest.raises(ParseError):
        load_manifest(future)

    overlap = tmp_path / "overlap.json"
    records = [entry("a", Split.TRAIN).model_dump(mode="json"), entry("a", Split.TEST).model_dump(mode="json")]
    overlap.write_text(json.dumps({"schema_version": 1, "records": records}), encoding="utf-8")
    with pytest.raises(SplitOverlap):
        load_manifest(overlap)


def test_load_cases_resolves_relative_paths(tmp_path):
    clip_a4c = random_clip(1, View.A4C, "a")
    clip_a2c = random_clip(2, View.A2C, "a")
    save_clip(clip_a4c, tmp_path / "clips" / "a_a4c")
    save_clip(clip_a2c, tmp_path / "clips" / "a_a2c")
    manifest = make_manifest([entry("a", Split.TRAIN, ef=42.0)])
    path = save_manifest(manifest, tmp_path / "manifest.json")

    (case,) = load_cases(load_manifest(path), path, Split.TRAIN)
    assert case.case_id == "a"
    assert case.ef_true == 42.0
    assert case.a2c.frames.tobytes() == clip_a2c.frames.tobytes()
    assert load_cases(manifest, path, Split.TEST) == []
