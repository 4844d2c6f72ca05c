"""
Candidate generation, top-k selection and augmented manifests.
"""

import os

import numpy as np
import pandas as pd
import pytest

from echosynth.config import AugmentMode, Provenance, Split, View
from echosynth.common.exceptions import ConfigError, MissingSelection, SplitOverlap
from echosynth.data.clip_store import load_clip
from echosynth.data.manifest import make_manifest
from echosynth.domain.interfaces import IClipGenerator, IEFPredictor
from echosynth.domain.models import Candidate, CandidateRanking, CaseEntry, EchoClip
from echosynth.services.curation import (
    build_augmented_manifest,
    candidate_seed,
    generate_candidates,
    rankings_table,
    select_top_k,
    synthetic_case_id,
)

from .conftest import random_case


class SeedEchoGenerator(IClipGenerator):
    """Constant clip whose grey level is derived from the seed."""

    def __init__(self):
        self.seeds = []

    def generate(self, a4c: EchoClip, seed: int) -> EchoClip:
        self.seeds.append(seed)
        level = (seed % 1000) / 1000.0
        frames = np.full((16, 1, 64, 64), level, dtype=np.float32)
        return EchoClip(frames=frames, view=View.A2C, case_id=a4c.case_id)


class MeanLevelPredictor(IEFPredictor):
    """EF in percent read off the clip's mean grey level."""

    def predict(self, clip: EchoClip) -> float:
        return float(clip.frames.mean()) * 100.0


def ranking(errors, case_id="c0", ef_true=50.0):
    return CandidateRanking(
        case_id=case_id,
        ef_true=ef_true,
        candidates=tuple(
            Candidate(sample_index=i, ef_pred=ef_true + e, abs_error=abs(e)) for i, e in enumerate(errors)
        ),
    )


def test_candidate_seeds_are_stable_and_distinct():
    seeds = {candidate_seed(0, case_id, i) for case_id in ("a", "b") for i in range(18)}
    assert len(seeds) == 36
    assert candidate_seed(3, "a", 5) == candidate_seed(3, "a", 5)
    assert candidate_seed(3, "a", 5) != candidate_seed(4, "a", 5)


def test_select_top_k_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 19))
        errors = rng.integers(0, 5, size=n).astype(float)
        k = int(rng.integers(0, n + 3))
        expected = sorted(range(n), key=lambda i: (errors[i], i))[:k]
        assert list(select_top_k(ranking(errors), k).selected) == expected


def test_select_top_k_edge_cases():
    base = ranking([3.0, 1.0, 2.0])
    assert select_top_k(base, 0).selected == ()
    assert select_top_k(base, 10).selected == (1, 2, 0)
    with pytest.raises(ConfigError):
        select_top_k(base, -1)


def test_generate_candidates_scores_every_sample(tmp_path):
    case = random_case(0, "case3", 40.0)
    generator = SeedEchoGenerator()
    result = generate_candidates(case, generator, MeanLevelPredictor(), n=5, seed=7, out_dir=tmp_path)

    assert result.case_id == "case3" and result.ef_true == 40.0
    assert [c.sample_index for c in result.candidates] == list(range(5))
    assert generator.seeds == [candidate_seed(7, "case3", i) for i in range(5)]
    for candidate, seed in zip(result.candidates, generator.seeds):
        assert candidate.ef_pred == pytest.approx((seed % 1000) / 10.0, abs=1e-3)
        assert candidate.abs_error == pytest.approx(abs(candidate.ef_pred - 40.0))
        stored = load_clip(tmp_path / candidate.clip_path)
        assert stored.case_id == "case3" and stored.view == View.A2C

    with pytest.raises(ConfigError):
        generate_candidates(case, generator, MeanLevelPredictor(), n=0)
    with pytest.raises(ValueError):
        generate_candidates(case, None, MeanLevelPredictor(), n=1)


def base_manifest():
    entries = [
        CaseEntry(case_id=f"tr{i}", a4c_path=f"clips/tr{i}_a4c.clip", a2c_path=f"clips/tr{i}_a2c.clip",
                  ef_true=30.0 + i, split=Split.TRAIN, provenance=Provenance.PHANTOM)
        for i in range(3)
    ]
    entries.append(CaseEntry(case_id="va0", a4c_path="clips/va0_a4c.clip", a2c_path="clips/va0_a2c.clip",
                             ef_true=45.0, split=Split.VAL, provenance=Provenance.PHANTOM))
    entries.append(CaseEntry(case_id="te0", a4c_path="clips/te0_a4c.clip", a2c_path="clips/te0_a2c.clip",
                             ef_true=55.0, split=Split.TEST, provenance=Provenance.PHANTOM))
    return make_manifest(entries, split_seed=2)


def selected_rankings(case_ids, k=3):
    rankings = []
    for case_id in case_ids:
        base = CandidateRanking(
            case_id=case_id,
            ef_true=40.0,
            candidates=tuple(
                Candidate(sample_index=i, clip_path=f"clips/{synthetic_case_id(case_id, i)}.clip",
                          ef_pred=40.0 + i, abs_error=float(i))
                for i in range(6)
            ),
        )
        rankings.append(select_top_k(base, k))
    return rankings


@pytest.mark.parametrize("mode, per_case", [(AugmentMode.SYNTHETIC_ONLY, 3), (AugmentMode.REAL_PLUS_SYNTHETIC, 4)])
def test_augmented_manifest_counts(mode, per_case):
    base = base_manifest()
    augmented = build_augmented_manifest(base, selected_rankings(["tr0", "tr1", "tr2"]), mode)
    assert augmented.counts == {"train": 3 * per_case, "val": 1, "test": 1}
    assert augmented.by_split(Split.VAL) == base.by_split(Split.VAL)
    assert augmented.by_split(Split.TEST) == base.by_split(Split.TEST)

    synthetic = [r for r in augmented.records if r.provenance == Provenance.SYNTHETIC]
    assert len(synthetic) == 9
    assert {r.source_case_id for r in synthetic} == {"tr0", "tr1", "tr2"}
    row = next(r for r in synthetic if r.case_id == "tr1__synth02")
    assert row.sample_index == 2
    assert row.a4c_path == "clips/tr1_a4c.clip"
    assert row.a2c_path == "clips/tr1__synth02.clip"
    assert row.ef_true == 31.0


def test_augmented_manifest_rebases_real_paths(tmp_path):
    base = base_manifest()
    augmented = build_augmented_manifest(
        base, selected_rankings(["tr0", "tr1", "tr2"]), AugmentMode.SYNTHETIC_ONLY,
        base_dir=tmp_path / "data", out_dir=tmp_path / "curate",
    )
    expected = os.path.relpath(tmp_path / "data" / "clips" / "tr0_a4c.clip", tmp_path / "curate")
    assert next(r for r in augmented.records if r.source_case_id == "tr0").a4c_path == expected


def test_missing_selection():
    base = base_manifest()
    with pytest.raises(MissingSelection):
        build_augmented_manifest(base, selected_rankings(["tr0", "tr1"]))
    with pytest.raises(MissingSelection):
        build_augmented_manifest(base, selected_rankings(["tr0", "tr1"]) + selected_rankings(["tr2"], k=0))


def test_synthetic_rows_stay_out_of_held_out_splits():
    base = base_manifest()
    augmented = build_augmented_manifest(base, selected_rankings(["tr0", "tr1", "tr2", "te0"]))
    assert all(r.provenance != Provenance.SYNTHETIC for r in augmented.records if r.split != Split.TRAIN)
    leaked = list(augmented.records) + [
        CaseEntry(case_id="te0__synth00", a4c_path="x.clip", a2c_path="y.clip", ef_true=55.0,
                  split=Split.TRAIN, provenance=Provenance.SYNTHETIC, source_case_id="te0", sample_index=0)
    ]
    with pytest.raises(SplitOverlap):
        make_manifest(leaked)


def test_rankings_table():
    table = rankings_table(selected_rankings(["tr0"], k=2))
    assert isinstance(table, pd.DataFrame)
    assert len(table) == 6
    assert table["selected"].sum() == 2
    assert table.loc[table["sample_index"] == 1, "rank"].item() == 2
