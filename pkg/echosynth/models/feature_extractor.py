"""
Clip Feature Extractor
======================

Encoder of a small clip autoencoder, used for Frechet feature distances.
The encoder keeps the time axis (3D convolutions, spatial striding only),
projects each frame's pooled activation to a d-dimensional latent, and
averages over time. A single frame passed as a 1-frame clip therefore
yields a per-frame feature with the same encoder.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import torch
import torch.nn as nn
from einops import rearrange

from ..common.exceptions import MissingArtifact, ParseError, wrap_exception
from ..domain.interfaces import IFeatureExtractor
from ..domain.models import EchoClip, FeatureExtractorConfig
from ..data.datasets import clips_to_batch

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
BOTTLENECK = 8


class ClipAutoencoder(nn.Module):
    """[B, 1, T, 64, 64] -> per-frame latents [B, T, d] -> reconstruction."""

    def __init__(self, config: FeatureExtractorConfig, size: int = 64):
        super().__init__()
        self.config = config
        w = config.width
        self.bottleneck = size // BOTTLENECK
        self.trunk = nn.Sequential(
            nn.Conv3d(1, w, 3, stride=(1, 2, 2), padding=1),
            nn.SiLU(),
            nn.Conv3d(w, w * 2, 3, stride=(1, 2, 2), padding=1),
            nn.SiLU(),
            nn.Conv3d(w * 2, w * 4, 3, stride=(1, 2, 2), padding=1),
            nn.SiLU(),
        )
        self.to_latent = nn.Linear(w * 4, config.feature_dim)
        self.from_latent = nn.Linear(config.feature_dim, w * 4 * self.bottleneck ** 2)
        self.decoder = nn.Sequential(
            nn.SiLU(),
            nn.ConvTranspose3d(w * 4, w * 2, (1, 4, 4), stride=(1, 2, 2), padding=(0, 1, 1)),
            nn.SiLU(),
            nn.ConvTranspose3d(w * 2, w, (1, 4, 4), stride=(1, 2, 2), padding=(0, 1, 1)),
            nn.SiLU(),
            nn.ConvTranspose3d(w, 1, (1, 4, 4), stride=(1, 2, 2), padding=(0, 1, 1)),
            nn.Tanh(),
        )

    def frame_latents(self, x: torch.Tensor) -> torch.Tensor:
        h = self.trunk(x).mean(dim=(3, 4))
        return self.to_latent(rearrange(h, "b c t -> b t c"))

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.frame_latents(x).mean(dim=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.from_latent(self.frame_latents(x))
        h = rearrange(z, "b t (c h w) -> b c t h w", h=self.bottleneck, w=self.bottleneck)
        return self.decoder(h)


class ClipFeatureExtractor(IFeatureExtractor):
    """Frozen autoencoder encoder exposed through IFeatureExtractor."""

    def __init__(self, model: ClipAutoencoder, provenance: Optional[Dict[str, Any]] = None, batch_size: int = 16):
        self.model = model.eval()
        for parameter in self.model.parameters():
            parameter.requires_grad_(False)
        self.provenance = dict(provenance or {})
        self.batch_size = batch_size

    @property
    def feature_dim(self) -> int:
        return self.model.config.feature_dim

    @torch.no_grad()
    def _encode(self, batch: torch.Tensor) -> np.ndarray:
        dtype = next(self.model.parameters()).dtype
        chunks = [
            self.model.encode(batch[i:i + self.batch_size].to(dtype)).double()
            for i in range(0, batch.shape[0], self.batch_size)
        ]
        if not chunks:
            return np.zeros((0, self.feature_dim))
        return torch.cat(chunks).numpy()

    def clip_features(self, clips: Sequence[EchoClip]) -> np.ndarray:
        if not clips:
            return np.zeros((0, self.feature_dim))
        return self._encode(clips_to_batch(clips))

    def frame_features(self, clips: Sequence[EchoClip]) -> np.ndarray:
        if not clips:
            return np.zeros((0, self.feature_dim))
        frames = rearrange(clips_to_batch(clips), "b c t h w -> (b t) c 1 h w")
        return self._encode(frames)

    def save(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {
                "config": self.model.config.model_dump(mode="json"),
                "state_dict": self.model.state_dict(),
                "provenance": self.provenance,
            },
            path,
        )
        logger.info(f"Saved feature extractor to {path}")
        return path

    @classmethod
    def load(cls, path: PathLike) -> "ClipFeatureExtractor":
        """
        Raises:
            MissingArtifact: If the file does not exist
            ParseError: If the file is not a feature-extractor archive
        """
        path = Path(path)
        if not path.exists():
            raise MissingArtifact(str(path), produced_by="evaluate")
        try:
            payload = torch.load(path, map_location="cpu", weights_only=False)
            model = ClipAutoencoder(FeatureExtractorConfig.model_validate(payload["config"]))
            model.load_state_dict(payload["state_dict"])
        except (KeyError, RuntimeError, ValueError) as e:
            raise wrap_exception(e, f"Invalid feature extractor archive: {path}", ParseError)
        return cls(model, payload.get("provenance"))


__all__ = [
    'ClipAutoencoder',
    'ClipFeatureExtractor',
]
