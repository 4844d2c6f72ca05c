"""
echosynth
=========

Controlled video diffusion for echocardiography: synthesise A2C clips
conditioned on A4C clips and their motion masks, curate the samples with
an EF regressor, and use them to train biplane EF models.

Layers:
- config: Constants, enums and defaults
- domain: Pydantic models and interfaces
- data: Preprocessing, clip containers, manifests, datasets
- phantom: Procedural paired echo phantoms with known EF
- diffusion: Noise schedules, forward process and sampler
- models: 3D U-Net, control branch, EF backbones, feature extractor
- services: Training, curation, metrics and reporting
- cli: YAML-driven pipeline commands
"""

from .config import VERSION as __version__

from .domain import (
    EchoClip,
    CaseRecord,
    CaseEntry,
    DatasetManifest,
    PhantomSpec,
    UNetConfig,
    EFBackboneConfig,
    FeatureExtractorConfig,
    TrainConfig,
    EFTrainConfig,
    EFReport,
    CandidateRanking,
)
from .diffusion import NoiseSchedule, make_schedule, forward_diffuse, sample_loop
from .models import (
    UNet3D,
    build_unet,
    denoise,
    ControlNetBranch,
    ControlledGenerator,
    init_control_branch,
    compute_motion_mask,
    assemble_condition,
)
from .phantom import generate_phantom_case, generate_phantom_dataset
from .services import (
    train_unconditional,
    train_conditional,
    train_ef,
    compute_metrics,
    generate_candidates,
    select_top_k,
    build_augmented_manifest,
    ssim,
    frechet_distance,
)
from .common import EchoSynthException, setup_logging

__all__ = [
    '__version__',
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
    'EFReport',
    'CandidateRanking',
    'NoiseSchedule',
    'make_schedule',
    'forward_diffuse',
    'sample_loop',
    'UNet3D',
    'build_unet',
    'denoise',
    'ControlNetBranch',
    'ControlledGenerator',
    'init_control_branch',
    'compute_motion_mask',
    'assemble_condition',
    'generate_phantom_case',
    'generate_phantom_dataset',
    'train_unconditional',
    'train_conditional',
    'train_ef',
    'compute_metrics',
    'generate_candidates',
    'select_top_k',
    'build_augmented_manifest',
    'ssim',
    'frechet_distance',
    'EchoSynthException',
    'setup_logging',
]
