"""
echosynth Models
================

Pydantic models shared across the pipeline: clips, cases, manifests,
phantom specifications, network and training configurations, reports.
"""

from typing import Optional, List, Dict, Tuple, FrozenSet

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config import (
    CLIP_SHAPE,
    PIXEL_MIN,
    PIXEL_MAX,
    SCHEMA_VERSION,
    COND_LR_MAX,
    COND_MAX_ITERS,
    COND_WARMUP_ITERS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_LOG_EVERY,
    FEATURE_DIM,
    UNCOND_LR_MAX,
    UNCOND_LR_MIN,
    View,
    Split,
    Provenance,
    ViewGeometry,
    TrainPhase,
    LRScheduleKind,
    PretrainSource,
    EFBackboneKind,
    EFDatasetMode,
)


class _Frozen(BaseModel):
    """Immutable, strict-keyed base for configuration-like models."""
    model_config = ConfigDict(extra="forbid", frozen=True)


# ==================== Clips and Cases ====================

class EchoClip(BaseModel):
    """
    A preprocessed echo clip.

    frames has shape [16, 1, 64, 64] (frames, channels, height, width) with
    every value in [-1, 1]. The array is made read-only on construction.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, extra="forbid")

    frames: np.ndarray
    view: View
    case_id: str
    frame_rate: float = 0.0

    @field_validator("frames")
    @classmethod
    def _check_frames(cls, value: np.ndarray) -> np.ndarray:
        array = np.asarray(value, dtype=np.float32)
        if array.shape != CLIP_SHAPE:
            raise ValueError(f"frames must have shape {CLIP_SHAPE}, got {array.shape}")
        if not np.isfinite(array).all():
            raise ValueError("frames contain non-finite values")
        if array.min() < PIXEL_MIN or array.max() > PIXEL_MAX:
            raise ValueError(
                f"frames must lie in [{PIXEL_MIN}, {PIXEL_MAX}], got [{array.min()}, {array.max()}]"
            )
        array = np.array(array, copy=True)
        array.setflags(write=False)
        return array


class CaseRecord(BaseModel):
    """A paired A4C/A2C study held in memory."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    a4c: EchoClip
    a2c: Optional[EchoClip] = None
    ef_true: float = Field(gt=0.0, lt=100.0)
    split: Split = Split.TRAIN
    provenance: Provenance = Provenance.PHANTOM

    @property
    def case_id(self) -> str:
        return self.a4c.case_id

    @model_validator(mode="after")
    def _check_pair(self) -> "CaseRecord":
        if self.a4c.view != View.A4C:
            raise ValueError("a4c clip must carry view A4C")
        if self.a2c is not None:
            if self.a2c.view != View.A2C:
                raise ValueError("a2c clip must carry view A2C")
            if self.a2c.case_id != self.a4c.case_id:
                raise ValueError(
                    f"case_id mismatch: a4c={self.a4c.case_id} a2c={self.a2c.case_id}"
                )
        return self


class CaseEntry(_Frozen):
    """
    Manifest row: a case referenced by clip-container paths.

    Paths are relative to the manifest's directory. source_case_id is set on
    synthetic rows and names the conditioning case.
    """
    case_id: str
    a4c_path: str
    a2c_path: Optional[str] = None
    ef_true: float = Field(gt=0.0, lt=100.0)
    split: Split
    provenance: Provenance
    source_case_id: Optional[str] = None
    sample_index: Optional[int] = None

    @property
    def group_id(self) -> str:
        """Identity used for split-disjointness: the conditioning case for synthetic rows."""
        return self.source_case_id or self.case_id


def _count_splits(records) -> Dict[str, int]:
    result = {split.value: 0 for split in Split}
    for record in records:
        split = record["split"] if isinstance(record, dict) else record.split
        result[Split(split).value] += 1
    return result


class DatasetManifest(_Frozen):
    """A list of case entries with split bookkeeping."""
    schema_version: int = SCHEMA_VERSION
    split_seed: int = 0
    records: Tuple[CaseEntry, ...] = ()
    counts: Dict[str, int] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _fill_counts(cls, data):
        if isinstance(data, dict) and not data.get("counts"):
            data = dict(data)
            data["counts"] = _count_splits(data.get("records", ()))
        return data

    @model_validator(mode="after")
    def _check_counts(self) -> "DatasetManifest":
        actual = _count_splits(self.records)
        if dict(self.counts) != actual:
            raise ValueError(f"counts {dict(self.counts)} do not match records {actual}")
        return self

    def by_split(self, split: Split) -> List[CaseEntry]:
        """Entries of one split in manifest order."""
        return [record for record in self.records if record.split == split]

    def case_ids(self, split: Optional[Split] = None) -> List[str]:
        return [r.case_id for r in self.records if split is None or r.split == split]


# ==================== Phantom ====================

class PhantomSpec(_Frozen):
    """Parameters of one procedurally generated phantom case."""
    area_ed: float
    area_es: float
    cycle_frames: int = Field(default=32, ge=4)
    noise_sigma: float = Field(default=0.15, ge=0.0)
    view_geometry: ViewGeometry = ViewGeometry.FOUR_CHAMBER_LIKE
    rng_seed: int = 0
    n_frames: int = Field(default=64, ge=32)
    size: int = Field(default=64, ge=16)
    phase_offset: float = 0.0

    @property
    def ef_true(self) -> float:
        """EF from pseudo-volumes V = A^{3/2}."""
        v_ed = self.area_ed ** 1.5
        v_es = self.area_es ** 1.5
        return 100.0 * (v_ed - v_es) / v_ed


# ==================== Networks ====================

class UNetConfig(_Frozen):
    """Configuration of the 3D denoising U-Net."""
    levels: int = Field(default=4, ge=1)
    base_channels: int = Field(default=32, ge=1)
    channel_multipliers: Tuple[int, ...] = (1, 2, 2, 4)
    time_embed_dim: int = Field(default=128, ge=2)
    attention_levels: FrozenSet[int] = frozenset({2, 3})
    in_channels: int = Field(default=1, ge=1)
    image_size: int = Field(default=64, ge=1)
    frames: int = Field(default=16, ge=1)
    attention_heads: int = Field(default=4, ge=1)
    norm_groups: int = Field(default=8, ge=1)

    @property
    def level_channels(self) -> List[int]:
        return [self.base_channels * m for m in self.channel_multipliers]


class EFBackboneConfig(_Frozen):
    """EF regressor backbone selection."""
    backbone: EFBackboneKind = EFBackboneKind.SMALL3DCNN
    input_shape: Tuple[int, int, int, int] = CLIP_SHAPE
    width: int = Field(default=16, ge=1)


class FeatureExtractorConfig(_Frozen):
    """Clip autoencoder used as the metric feature extractor."""
    feature_dim: int = Field(default=FEATURE_DIM, ge=1)
    width: int = Field(default=16, ge=1)
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=8, ge=1)
    lr: float = Field(default=1e-3, gt=0.0)
    seed: int = 0


# ==================== Training ====================

class TrainConfig(_Frozen):
    """Diffusion training configuration for either phase."""
    phase: TrainPhase = TrainPhase.UNCONDITIONAL
    max_iters: int = Field(default=1000, ge=1)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)
    lr_max: float = Field(default=UNCOND_LR_MAX, gt=0.0)
    lr_min: float = Field(default=UNCOND_LR_MIN, ge=0.0)
    lr_schedule: LRScheduleKind = LRScheduleKind.COSINE_ANNEALING
    warmup_iters: int = Field(default=0, ge=0)
    freeze_host: bool = False
    seed: int = 0
    checkpoint_every: int = Field(default=0, ge=0)
    log_every: int = Field(default=DEFAULT_LOG_EVERY, ge=1)
    pretrain_source: PretrainSource = PretrainSource.INTERNAL
    progress: bool = False

    @model_validator(mode="after")
    def _check_lr(self) -> "TrainConfig":
        if self.lr_min > self.lr_max:
            raise ValueError(f"lr_min ({self.lr_min}) must be <= lr_max ({self.lr_max})")
        if self.warmup_iters >= self.max_iters and self.max_iters > 1:
            raise ValueError("warmup_iters must be smaller than max_iters")
        return self

    @classmethod
    def conditional_defaults(cls, **overrides) -> "TrainConfig":
        """Phase-2 defaults: 5e-5 peak, 10 warmup iterations, 80k iterations."""
        values = dict(
            phase=TrainPhase.CONDITIONAL,
            max_iters=COND_MAX_ITERS,
            lr_max=COND_LR_MAX,
            lr_min=UNCOND_LR_MIN,
            warmup_iters=COND_WARMUP_ITERS,
        )
        values.update(overrides)
        return cls(**values)


class EFTrainConfig(_Frozen):
    """EF regressor training configuration."""
    epochs: int = Field(default=50, ge=1)
    batch_size: int = Field(default=8, ge=1)
    lr: float = Field(default=1e-3, gt=0.0)
    seed: int = 0
    dataset_mode: EFDatasetMode = EFDatasetMode.A4C
    weight_decay: float = Field(default=0.0, ge=0.0)


# ==================== Reports ====================

class CasePrediction(_Frozen):
    """One row of an EF report."""
    case_id: str
    ef_true: float
    ef_pred: float


class EFReport(_Frozen):
    """Regression quality of a set of EF predictions."""
    r2: float
    mae: float
    rmse: float
    predictions: Tuple[CasePrediction, ...] = ()


class Candidate(_Frozen):
    """A synthetic A2C candidate scored by the EF model."""
    sample_index: int = Field(ge=0)
    clip_path: Optional[str] = None
    ef_pred: float
    abs_error: float = Field(ge=0.0)


class CandidateRanking(_Frozen):
    """Candidates for one conditioning case and the selected subset."""
    case_id: str
    ef_true: float
    candidates: Tuple[Candidate, ...] = ()
    selected: Tuple[int, ...] = ()


__all__ = [
    'EchoClip',
    'CaseRecord',
    'CaseEntry',
    'DatasetManifest',
    'PhantomSpec',
    'UNetConfig',
    'EFBackboneConfig',
    'FeatureExtractorConfig',
    'TrainConfig',
    'EFTrainConfig',
    'CasePrediction',
    'EFReport',
    'Candidate',
    'CandidateRanking',
]
