"""
Models Module
=============

Torch networks: the denoising U-Net, its control branch, EF regressors and
the clip feature extractor.
"""

from .unet import ControlResiduals, UNet3D, build_unet, denoise, injection_shapes
from .control import (
    ControlNetBranch,
    ControlledGenerator,
    assemble_condition,
    compute_motion_mask,
    control_forward,
    init_control_branch,
)
from .ef_backbones import EFRegressor, Small3DCNN, ResNet2Plus1DLike, TransformerLike
from .feature_extractor import ClipAutoencoder, ClipFeatureExtractor

__all__ = [
    'ControlResiduals',
    'UNet3D',
    'build_unet',
    'denoise',
    'injection_shapes',
    'ControlNetBranch',
    'ControlledGenerator',
    'assemble_condition',
    'compute_motion_mask',
    'control_forward',
    'init_control_branch',
    'EFRegressor',
    'Small3DCNN',
    'ResNet2Plus1DLike',
    'TransformerLike',
    'ClipAutoencoder',
    'ClipFeatureExtractor',
]
