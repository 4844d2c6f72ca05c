"""
Configuration Module
====================

Central configuration and constants for echosynth.
Clip geometry, diffusion defaults, training budgets and every enum used
across the pipeline live here.
"""

from enum import Enum
from typing import Final, Tuple


# ==================== Version ====================

VERSION: Final[str] = "0.3.0"

SCHEMA_VERSION: Final[int] = 1


# ==================== Clip Geometry ====================

CLIP_FRAMES: Final[int] = 16
CLIP_CHANNELS: Final[int] = 1
CLIP_SIZE: Final[int] = 64
CLIP_SHAPE: Final[Tuple[int, int, int, int]] = (CLIP_FRAMES, CLIP_CHANNELS, CLIP_SIZE, CLIP_SIZE)

WINDOW_FRAMES: Final[int] = 32
TEMPORAL_STRIDE: Final[int] = 2
DEFAULT_WINDOW_STRIDE: Final[int] = 16

PIXEL_MIN: Final[float] = -1.0
PIXEL_MAX: Final[float] = 1.0


# ==================== Enums ====================

class View(str, Enum):
    """Echocardiographic view of a clip."""
    A2C = "A2C"
    A4C = "A4C"


class Split(str, Enum):
    """Dataset split membership."""
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class Provenance(str, Enum):
    """Where a case came from."""
    REAL = "real"
    PHANTOM = "phantom"
    SYNTHETIC = "synthetic"


class ViewGeometry(str, Enum):
    """Phantom chamber layout."""
    FOUR_CHAMBER_LIKE = "four_chamber_like"
    TWO_CHAMBER_LIKE = "two_chamber_like"


class ScheduleKind(str, Enum):
    """Noise schedule families."""
    LINEAR = "linear"
    COSINE = "cosine"


class ReverseVariance(str, Enum):
    """Variance used for the noise added in each reverse step."""
    BETA = "beta"            # sigma_t^2 = beta_t
    POSTERIOR = "posterior"  # sigma_t^2 = beta_t (1 - abar_{t-1}) / (1 - abar_t)


class TrainPhase(str, Enum):
    """Diffusion training phases."""
    UNCONDITIONAL = "unconditional"
    CONDITIONAL = "conditional"


class LRScheduleKind(str, Enum):
    """Learning-rate schedules."""
    COSINE_ANNEALING = "cosine_annealing"


class PretrainSource(str, Enum):
    """Where the host U-Net weights come from before conditional training."""
    INTERNAL = "internal"        # separate unconditional corpus
    PAIRED_ONLY = "paired_only"  # A2C clips of the paired training split
    SCRATCH = "scratch"          # random init, no phase 1


class EFBackboneKind(str, Enum):
    """EF regressor backbones."""
    SMALL3DCNN = "small3dcnn"
    RESNET2PLUS1D_LIKE = "resnet2plus1d_like"
    TRANSFORMER_LIKE = "transformer_like"


class EFDatasetMode(str, Enum):
    """Training-set compositions for the EF regressor."""
    A4C = "a4c"
    A4C_A2C = "a4c_a2c"
    A4C_SYNTH_A2C = "a4c_synth_a2c"
    A4C_A2C_SYNTH_A2C = "a4c_a2c_synth_a2c"


class AugmentMode(str, Enum):
    """How curated synthetic clips join a manifest."""
    SYNTHETIC_ONLY = "synthetic_only"
    REAL_PLUS_SYNTHETIC = "real_plus_synthetic"


class FFDMode(str, Enum):
    """Feature granularity for the Frechet feature distance."""
    PER_FRAME = "per_frame"
    PER_CLIP = "per_clip"


class ExitCode(int, Enum):
    """CLI exit statuses."""
    SUCCESS = 0
    CONFIG_ERROR = 1
    DATA_ERROR = 2
    NUMERICAL_FAILURE = 3


# ==================== Diffusion Defaults ====================

DEFAULT_DIFFUSION_STEPS: Final[int] = 1000
DEFAULT_BETA_START: Final[float] = 1e-4
DEFAULT_BETA_END: Final[float] = 0.02
COSINE_SCHEDULE_OFFSET: Final[float] = 0.008
COSINE_MAX_BETA: Final[float] = 0.999


# ==================== Motion Mask ====================

DEFAULT_MASK_SIGMA: Final[float] = 1.5
DEFAULT_MASK_TRUNCATE: Final[float] = 4.0


# ==================== Training Defaults ====================

UNCOND_LR_MAX: Final[float] = 1e-4
UNCOND_LR_MIN: Final[float] = 1e-7
COND_LR_MAX: Final[float] = 5e-5
COND_WARMUP_ITERS: Final[int] = 10
COND_MAX_ITERS: Final[int] = 80_000
DEFAULT_BATCH_SIZE: Final[int] = 4
DEFAULT_LOG_EVERY: Final[int] = 50
LOSS_SMOOTHING: Final[float] = 0.9


# ==================== EF Regression ====================

EF_GRID_BATCH_SIZES: Final[Tuple[int, ...]] = (8, 16, 24)
EF_GRID_EPOCHS: Final[Tuple[int, ...]] = (50, 100, 150)
EF_GRID_LEARNING_RATES: Final[Tuple[float, ...]] = (1e-3, 5e-4, 1e-4)
EF_VAL_STUDIES: Final[int] = 50
EF_REPORT_MIN: Final[float] = 0.0
EF_REPORT_MAX: Final[float] = 100.0


# ==================== Curation ====================

CANDIDATES_PER_CASE: Final[int] = 18
TOP_K: Final[int] = 3


# ==================== Metrics ====================

FEATURE_DIM: Final[int] = 64
SSIM_WINDOW: Final[int] = 7
SSIM_K1: Final[float] = 0.01
SSIM_K2: Final[float] = 0.03
SSIM_DATA_RANGE: Final[float] = 2.0
EIGEN_CLIP_TOLERANCE: Final[float] = -1e-8


# ==================== Environment ====================

OUTPUT_ROOT_ENV: Final[str] = "ECHOSYNTH_OUTPUT_ROOT"
RESOLVED_CONFIG_NAME: Final[str] = "resolved_config.yaml"
SUMMARY_NAME: Final[str] = "summary.json"
RUN_LOG_NAME: Final[str] = "run.log"


__all__ = [
    'VERSION',
    'SCHEMA_VERSION',
    # Geometry
    'CLIP_FRAMES',
    'CLIP_CHANNELS',
    'CLIP_SIZE',
    'CLIP_SHAPE',
    'WINDOW_FRAMES',
    'TEMPORAL_STRIDE',
    'DEFAULT_WINDOW_STRIDE',
    'PIXEL_MIN',
    'PIXEL_MAX',
    # Enums
    'View',
    'Split',
    'Provenance',
    'ViewGeometry',
    'ScheduleKind',
    'ReverseVariance',
    'TrainPhase',
    'LRScheduleKind',
    'PretrainSource',
    'EFBackboneKind',
    'EFDatasetMode',
    'AugmentMode',
    'FFDMode',
    'ExitCode',
    # Diffusion
    'DEFAULT_DIFFUSION_STEPS',
    'DEFAULT_BETA_START',
    'DEFAULT_BETA_END',
    'COSINE_SCHEDULE_OFFSET',
    'COSINE_MAX_BETA',
    # Motion mask
    'DEFAULT_MASK_SIGMA',
    'DEFAULT_MASK_TRUNCATE',
    # Training
    'UNCOND_LR_MAX',
    'UNCOND_LR_MIN',
    'COND_LR_MAX',
    'COND_WARMUP_ITERS',
    'COND_MAX_ITERS',
    'DEFAULT_BATCH_SIZE',
    'DEFAULT_LOG_EVERY',
    'LOSS_SMOOTHING',
    # EF
    'EF_GRID_BATCH_SIZES',
    'EF_GRID_EPOCHS',
    'EF_GRID_LEARNING_RATES',
    'EF_VAL_STUDIES',
    'EF_REPORT_MIN',
    'EF_REPORT_MAX',
    # Curation
    'CANDIDATES_PER_CASE',
    'TOP_K',
    # Metrics
    'FEATURE_DIM',
    'SSIM_WINDOW',
    'SSIM_K1',
    'SSIM_K2',
    'SSIM_DATA_RANGE',
    'EIGEN_CLIP_TOLERANCE',
    # Environment
    'OUTPUT_ROOT_ENV',
    'RESOLVED_CONFIG_NAME',
    'SUMMARY_NAME',
    'RUN_LOG_NAME',
]
