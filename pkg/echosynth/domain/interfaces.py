"""
echosynth Interfaces
====================

Abstract contracts between the pipeline stages. Curation, evaluation and
the CLI depend on these rather than on concrete networks.
"""

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

from .models import EchoClip


class IClipGenerator(ABC):
    """Produces a synthetic A2C clip conditioned on an A4C clip."""

    @abstractmethod
    def generate(self, a4c: EchoClip, seed: int) -> EchoClip:
        """Sample one synthetic A2C clip for the given conditioning clip and seed."""
        pass


class IEFPredictor(ABC):
    """Maps a clip to an ejection-fraction estimate in percent."""

    @abstractmethod
    def predict(self, clip: EchoClip) -> float:
        """Return the unclamped EF prediction for one clip."""
        pass


class IFeatureExtractor(ABC):
    """Maps clips to fixed-length feature vectors for Frechet distances."""

    @property
    @abstractmethod
    def feature_dim(self) -> int:
        """Dimension d of the returned feature vectors."""
        pass

    @abstractmethod
    def clip_features(self, clips: Sequence[EchoClip]) -> np.ndarray:
        """Return an [n_clips, d] array of spatiotemporal features."""
        pass

    @abstractmethod
    def frame_features(self, clips: Sequence[EchoClip]) -> np.ndarray:
        """Return an [n_clips * n_frames, d] array of per-frame features."""
        pass


__all__ = [
    'IClipGenerator',
    'IEFPredictor',
    'IFeatureExtractor',
]
