"""
Data Module
===========

Preprocessing, clip containers, manifests, torch datasets and the
external paired-data loader.
"""

from .preprocessing import (
    enumerate_windows,
    preprocess_clip,
    preprocess_video,
    to_uint8,
)
from .clip_store import (
    ClipMetadata,
    save_clip,
    load_clip,
    load_clip_metadata,
)
from .manifest import (
    validate_disjoint,
    make_manifest,
    save_manifest,
    load_manifest,
    resolve_path,
    load_case,
    load_cases,
)
from .datasets import (
    clip_to_tensor,
    clips_to_batch,
    tensor_to_frames,
    tensor_to_clip,
    ClipDataset,
    PairedClipDataset,
    EFDataset,
)
from .external_loader import load_external_pairs

__all__ = [
    'enumerate_windows',
    'preprocess_clip',
    'preprocess_video',
    'to_uint8',
    'ClipMetadata',
    'save_clip',
    'load_clip',
    'load_clip_metadata',
    'validate_disjoint',
    'make_manifest',
    'save_manifest',
    'load_manifest',
    'resolve_path',
    'load_case',
    'load_cases',
    'clip_to_tensor',
    'clips_to_batch',
    'tensor_to_frames',
    'tensor_to_clip',
    'ClipDataset',
    'PairedClipDataset',
    'EFDataset',
    'load_external_pairs',
]
