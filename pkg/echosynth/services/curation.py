"""
Synthetic Data Curation
=======================

Generate several conditional A2C candidates per case, score each with an
EF model, keep the k whose EF is closest to the conditioning case's
ground truth, and fold the survivors into an augmented manifest.
"""

import logging
import os
import zlib
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..config import CANDIDATES_PER_CASE, TOP_K, AugmentMode, Provenance, Split
from ..common.decorators import validate_not_none
from ..common.exceptions import ConfigError, MissingSelection
from ..domain.interfaces import IClipGenerator, IEFPredictor
from ..domain.models import Candidate, CandidateRanking, CaseEntry, CaseRecord, DatasetManifest
from ..data.clip_store import save_clip
from ..data.manifest import make_manifest

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def candidate_seed(seed: int, case_id: str, sample_index: int) -> int:
    """Sub-seed for one candidate, distinct per (case, index) and stable across runs."""
    sequence = np.random.SeedSequence([int(seed), zlib.crc32(case_id.encode("utf-8")), int(sample_index)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def synthetic_case_id(case_id: str, sample_index: int) -> str:
    return f"{case_id}__synth{sample_index:02d}"


@validate_not_none("generator", "ef_model")
def generate_candidates(
    case: CaseRecord,
    generator: IClipGenerator,
    ef_model: IEFPredictor,
    n: int = CANDIDATES_PER_CASE,
    seed: int = 0,
    out_dir: Optional[PathLike] = None,
) -> CandidateRanking:
    """
    Sample n A2C candidates conditioned on the case's A4C clip and score them.

    abs_error is |ef_pred - ef_true| against the conditioning case. With
    out_dir, clips are stored under ``out_dir/clips`` and clip_path is
    relative to out_dir.

    Raises:
        ConfigError: If n < 1
        ValueError: If generator or ef_model is None
    """
    if n < 1:
        raise ConfigError(f"Need at least one candidate per case, got n={n}")
    candidates = []
    for index in range(n):
        sub_seed = candidate_seed(seed, case.case_id, index)
        clip = generator.generate(case.a4c, sub_seed)
        ef_pred = float(ef_model.predict(clip))
        clip_path = None
        if out_dir is not None:
            saved = save_clip(
                clip,
                Path(out_dir) / "clips" / synthetic_case_id(case.case_id, index),
                Provenance.SYNTHETIC,
                {"seed": sub_seed, "sample_index": index, "source_case_id": case.case_id},
            )
            clip_path = str(saved.relative_to(Path(out_dir)))
        candidates.append(Candidate(
            sample_index=index,
            clip_path=clip_path,
            ef_pred=ef_pred,
            abs_error=abs(ef_pred - case.ef_true),
        ))
    logger.debug(f"{case.case_id}: {n} candidate(s), best abs error {min(c.abs_error for c in candidates):.2f}")
    return CandidateRanking(case_id=case.case_id, ef_true=case.ef_true, candidates=tuple(candidates))


def select_top_k(ranking: CandidateRanking, k: int = TOP_K) -> CandidateRanking:
    """
    Select the k smallest abs errors; ties go to the lower sample_index.

    k larger than the candidate count selects every candidate.

    Raises:
        ConfigError: If k is negative
    """
    if k < 0:
        raise ConfigError(f"k must be non-negative, got {k}")
    ordered = sorted(ranking.candidates, key=lambda c: (c.abs_error, c.sample_index))
    return ranking.model_copy(update={"selected": tuple(c.sample_index for c in ordered[:k])})


def _rebase(relative: Optional[str], base_dir: Optional[Path], out_dir: Optional[Path]) -> Optional[str]:
    if relative is None or base_dir is None or out_dir is None:
        return relative
    return os.path.relpath(base_dir / relative, out_dir)


def build_augmented_manifest(
    base: DatasetManifest,
    rankings: Sequence[CandidateRanking],
    mode: AugmentMode = AugmentMode.SYNTHETIC_ONLY,
    base_dir: Optional[PathLike] = None,
    out_dir: Optional[PathLike] = None,
) -> DatasetManifest:
    """
    Pair each training A4C clip with its selected synthetic A2C clips.

    synthetic_only yields k rows per training case; real_plus_synthetic also
    keeps the real pair. Validation and test rows are copied unchanged and
    never receive synthetic rows. Real clip paths are rebased from base_dir
    to out_dir when both are given; candidate paths are taken as relative to
    out_dir.

    Raises:
        MissingSelection: If a training case has no ranking or an empty selection
    """
    mode = AugmentMode(mode)
    base_dir = Path(base_dir) if base_dir is not None else None
    out_dir = Path(out_dir) if out_dir is not None else None
    by_case: Dict[str, CandidateRanking] = {r.case_id: r for r in rankings}

    records: List[CaseEntry] = []
    for entry in base.records:
        real = entry.model_copy(update={
            "a4c_path": _rebase(entry.a4c_path, base_dir, out_dir),
            "a2c_path": _rebase(entry.a2c_path, base_dir, out_dir),
        })
        if entry.split != Split.TRAIN or entry.provenance == Provenance.SYNTHETIC:
            records.append(real)
            continue
        ranking = by_case.get(entry.case_id)
        if ranking is None or not ranking.selected:
            raise MissingSelection(f"No selected candidates for training case {entry.case_id}")
        if mode == AugmentMode.REAL_PLUS_SYNTHETIC:
            records.append(real)
        candidates = {c.sample_index: c for c in ranking.candidates}
        for index in ranking.selected:
            records.append(CaseEntry(
                case_id=synthetic_case_id(entry.case_id, index),
                a4c_path=real.a4c_path,
                a2c_path=candidates[index].clip_path,
                ef_true=entry.ef_true,
                split=entry.split,
                provenance=Provenance.SYNTHETIC,
                source_case_id=entry.case_id,
                sample_index=index,
            ))

    ignored = sorted(set(by_case) - set(base.case_ids(Split.TRAIN)))
    if ignored:
        logger.warning(f"Ignoring rankings for {len(ignored)} non-training case(s)")
    manifest = make_manifest(records, split_seed=base.split_seed)
    logger.info(f"Augmented manifest ({mode.value}): {manifest.counts}")
    return manifest


def rankings_table(rankings: Sequence[CandidateRanking]) -> pd.DataFrame:
    """One row per candidate with its rank and selection flag."""
    rows = []
    for ranking in rankings:
        ranks = {index: rank for rank, index in enumerate(ranking.selected, start=1)}
        for candidate in ranking.candidates:
            rows.append({
                "case_id": ranking.case_id,
                "ef_true": ranking.ef_true,
                "sample_index": candidate.sample_index,
                "ef_pred": candidate.ef_pred,
                "abs_error": candidate.abs_error,
                "selected": candidate.sample_index in ranks,
                "rank": ranks.get(candidate.sample_index),
                "clip_path": candidate.clip_path,
            })
    columns = ["case_id", "ef_true", "sample_index", "ef_pred", "abs_error", "selected", "rank", "clip_path"]
    return pd.DataFrame(rows, columns=columns)


__all__ = [
    'candidate_seed',
    'synthetic_case_id',
    'generate_candidates',
    'select_top_k',
    'build_augmented_manifest',
    'rankings_table',
]
