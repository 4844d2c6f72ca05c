"""
Run Configuration
=================

Declarative YAML run files validated into a ``RunConfig``. One file can
drive the whole pipeline; each command reads its own section plus the
shared ones (output root, run name, seed, model configs).

Precedence, lowest first: section defaults, the YAML file, the
``ECHOSYNTH_OUTPUT_ROOT`` environment variable, ``--set key.sub=value``.

Example:
    >>> config = load_run_config("run.yaml", ["control.train.max_iters=500"])
    >>> config.command_dir("train-control")
    PosixPath('runs/default/train-control')
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..config import (
    CANDIDATES_PER_CASE,
    DEFAULT_BETA_END,
    DEFAULT_BETA_START,
    DEFAULT_DIFFUSION_STEPS,
    DEFAULT_MASK_SIGMA,
    EF_VAL_STUDIES,
    OUTPUT_ROOT_ENV,
    SCHEMA_VERSION,
    TOP_K,
    AugmentMode,
    ReverseVariance,
    ScheduleKind,
    Split,
    TrainPhase,
)
from ..common.exceptions import ConfigError, wrap_exception
from ..diffusion.schedule import NoiseSchedule, make_schedule
from ..domain.models import (
    EFBackboneConfig,
    EFTrainConfig,
    FeatureExtractorConfig,
    TrainConfig,
    UNetConfig,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PhantomSection(_Section):
    n_train: int = Field(default=450, ge=0)
    n_val: int = Field(default=0, ge=0)
    n_test: int = Field(default=50, ge=0)
    ef_range: Tuple[float, float] = (20.0, 75.0)
    noise_sigma: float = Field(default=0.15, ge=0.0)
    workers: int = Field(default=0, ge=0)


class DataSection(_Section):
    """Dataset locations; unset paths resolve to the run's own outputs."""
    manifest: Optional[str] = None
    internal_manifest: Optional[str] = None
    external_root: Optional[str] = None
    val_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    test_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)


class ScheduleSection(_Section):
    kind: ScheduleKind = ScheduleKind.LINEAR
    steps: int = Field(default=DEFAULT_DIFFUSION_STEPS, ge=1)
    beta_start: float = DEFAULT_BETA_START
    beta_end: float = DEFAULT_BETA_END
    variance: ReverseVariance = ReverseVariance.BETA

    def build(self) -> NoiseSchedule:
        return make_schedule(self.kind, self.steps, self.beta_start, self.beta_end)


def _conditional_train_defaults() -> Dict[str, Any]:
    return TrainConfig.conditional_defaults().model_dump(mode="json")


class ControlSection(_Section):
    train: TrainConfig = Field(default_factory=TrainConfig.conditional_defaults)
    host_checkpoint: Optional[str] = None
    resume: Optional[str] = None
    mask_sigma: float = Field(default=DEFAULT_MASK_SIGMA, gt=0.0)
    ablation: bool = False

    @field_validator("train", mode="before")
    @classmethod
    def _fill_conditional(cls, value: Any) -> Any:
        if isinstance(value, Mapping):
            return {**_conditional_train_defaults(), **value}
        return value

    @field_validator("train")
    @classmethod
    def _check_phase(cls, value: TrainConfig) -> TrainConfig:
        if value.phase != TrainPhase.CONDITIONAL:
            raise ValueError("control.train.phase must be conditional")
        return value


class UncondSection(_Section):
    train: TrainConfig = Field(default_factory=TrainConfig)
    resume: Optional[str] = None

    @field_validator("train")
    @classmethod
    def _check_phase(cls, value: TrainConfig) -> TrainConfig:
        if value.phase != TrainPhase.UNCONDITIONAL:
            raise ValueError("uncond.train.phase must be unconditional")
        return value


class SampleSection(_Section):
    checkpoint: Optional[str] = None
    split: Split = Split.TEST
    n_cases: int = Field(default=4, ge=1)
    per_case: int = Field(default=2, ge=1)
    gif: bool = True
    frame_ms: int = Field(default=80, ge=1)


class CurateSection(_Section):
    checkpoint: Optional[str] = None
    ef_model: Optional[str] = None
    n_candidates: int = Field(default=CANDIDATES_PER_CASE, ge=1)
    top_k: int = Field(default=TOP_K, ge=0)
    mode: AugmentMode = AugmentMode.SYNTHETIC_ONLY


class EFSection(_Section):
    backbone: EFBackboneConfig = Field(default_factory=EFBackboneConfig)
    train: EFTrainConfig = Field(default_factory=EFTrainConfig)
    manifest: Optional[str] = None
    grid: bool = False
    n_val: int = Field(default=EF_VAL_STUDIES, ge=1)


class EvaluateSection(_Section):
    """
    ef_models and checkpoints map a table row name to an artifact path;
    empty maps pick up whatever train-ef and train-control wrote for this run.
    """
    ef_models: Dict[str, str] = Field(default_factory=dict)
    biplane: Optional[bool] = None
    checkpoints: Dict[str, str] = Field(default_factory=dict)
    n_eval_cases: int = Field(default=16, ge=2)
    features: FeatureExtractorConfig = Field(default_factory=FeatureExtractorConfig)
    generative: bool = True


class RunConfig(_Section):
    """Every setting of a pipeline run."""
    schema_version: int = SCHEMA_VERSION
    run_name: str = "default"
    output_root: str = "runs"
    seed: int = 0
    device: str = "cpu"
    progress: bool = False
    phantom: PhantomSection = Field(default_factory=PhantomSection)
    data: DataSection = Field(default_factory=DataSection)
    unet: UNetConfig = Field(default_factory=UNetConfig)
    schedule: ScheduleSection = Field(default_factory=ScheduleSection)
    uncond: UncondSection = Field(default_factory=UncondSection)
    control: ControlSection = Field(default_factory=ControlSection)
    sample: SampleSection = Field(default_factory=SampleSection)
    curate: CurateSection = Field(default_factory=CurateSection)
    ef: EFSection = Field(default_factory=EFSection)
    evaluate: EvaluateSection = Field(default_factory=EvaluateSection)

    @field_validator("schema_version")
    @classmethod
    def _check_version(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {value}, expected {SCHEMA_VERSION}")
        return value

    @property
    def run_dir(self) -> Path:
        return Path(self.output_root) / self.run_name

    def command_dir(self, command: str, *parts: str) -> Path:
        return self.run_dir.joinpath(command, *parts)

    def resolved(self) -> Dict[str, Any]:
        """Plain-data form written as resolved_config.yaml."""
        return self.model_dump(mode="json")


# ==================== Loading ====================

def parse_override(item: str) -> Tuple[Tuple[str, ...], Any]:
    """
    Split ``key.sub=value``; the value is read as YAML so numbers and booleans keep their type.

    Raises:
        ConfigError: If the item is not of the form key=value
    """
    key, sep, raw = item.partition("=")
    keys = tuple(part.strip() for part in key.split("."))
    if not sep or not all(keys):
        raise ConfigError(f"Override must look like key.sub=value, got {item!r}")
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError as e:
        raise wrap_exception(e, f"Cannot parse override value {raw!r}", ConfigError)
    return keys, value


def apply_override(data: Dict[str, Any], keys: Sequence[str], value: Any) -> None:
    node = data
    for key in keys[:-1]:
        child = node.get(key)
        if child is None:
            child = node[key] = {}
        elif not isinstance(child, dict):
            raise ConfigError(f"Cannot set {'.'.join(keys)}: {key} is not a section")
        node = child
    node[keys[-1]] = value


def read_config_file(path: PathLike) -> Dict[str, Any]:
    """
    Raises:
        ConfigError: If the file is missing, unparsable or not a mapping
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}", {"path": str(path)})
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise wrap_exception(e, f"Cannot parse config file {path}", ConfigError)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file must hold a mapping: {path}")
    return data


def load_run_config(
    path: Optional[PathLike] = None,
    overrides: Sequence[str] = (),
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Build a RunConfig from an optional YAML file, the environment and overrides.

    Raises:
        ConfigError: On unreadable files, malformed overrides, unknown keys or invalid values
    """
    data = read_config_file(path) if path is not None else {}
    environ = os.environ if environ is None else environ
    if environ.get(OUTPUT_ROOT_ENV):
        data["output_root"] = environ[OUTPUT_ROOT_ENV]
    for item in overrides:
        apply_override(data, *parse_override(item))
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        errors = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigError("Invalid run configuration", {"errors": errors}, original_exception=e)
    logger.debug(f"Loaded run config {config.run_name!r} (output root {config.output_root})")
    return config


__all__ = [
    'PhantomSection',
    'DataSection',
    'ScheduleSection',
    'ControlSection',
    'UncondSection',
    'SampleSection',
    'CurateSection',
    'EFSection',
    'EvaluateSection',
    'RunConfig',
    'parse_override',
    'apply_override',
    'read_config_file',
    'load_run_config',
]
