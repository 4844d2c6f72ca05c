"""
Evaluation Metrics
==================

SSIM between paired clips and Frechet feature distances (FFD) between
clip sets, using features from a self-trained clip autoencoder.

FFD-frame uses per-frame features and FFD-clip uses spatiotemporal
per-clip features. They follow the FID/FVD recipe but are not comparable
to numbers computed with Inception or I3D features.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F
from scipy.signal import correlate2d
from torch.utils.data import DataLoader
from tqdm import tqdm

from ..config import (
    EIGEN_CLIP_TOLERANCE,
    SSIM_DATA_RANGE,
    SSIM_K1,
    SSIM_K2,
    SSIM_WINDOW,
    FFDMode,
)
from ..common.decorators import log_execution
from ..common.exceptions import (
    DataEmpty,
    DimensionMismatch,
    LengthMismatch,
    NotPSD,
    ShapeMismatch,
    TooFewSamples,
)
from ..common.type_guards import validate_same_shape
from ..domain.interfaces import IFeatureExtractor
from ..domain.models import EchoClip, FeatureExtractorConfig
from ..data.datasets import ClipDataset
from ..models.feature_extractor import ClipAutoencoder, ClipFeatureExtractor

logger = logging.getLogger(__name__)

ImageLike = Union[np.ndarray, EchoClip]

SSIM_SIGMA = 1.5
FFD_LABELS: Dict[FFDMode, str] = {
    FFDMode.PER_FRAME: "FFD-frame",
    FFDMode.PER_CLIP: "FFD-clip",
}


# ==================== SSIM ====================

def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalised 2-D Gaussian window."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    window = np.outer(g, g)
    return window / window.sum()


def _ssim_2d(a: np.ndarray, b: np.ndarray, window: np.ndarray, c1: float, c2: float) -> float:
    def filt(x: np.ndarray) -> np.ndarray:
        return correlate2d(x, window, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    numerator = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    denominator = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(numerator / denominator))


def _as_frames(x: ImageLike) -> np.ndarray:
    """Any of [H, W], [C, H, W] or [T, C, H, W] as a stack of 2-D frames."""
    array = np.asarray(x.frames if isinstance(x, EchoClip) else x, dtype=np.float64)
    if array.ndim < 2:
        raise ShapeMismatch("[..., H, W]", array.shape, "image")
    return array.reshape(-1, *array.shape[-2:])


def ssim(
    a: ImageLike,
    b: ImageLike,
    window: int = SSIM_WINDOW,
    k1: float = SSIM_K1,
    k2: float = SSIM_K2,
    data_range: float = SSIM_DATA_RANGE,
) -> float:
    """
    Mean SSIM over frames, Gaussian-weighted window, valid region only.

    Raises:
        ShapeMismatch: If shapes differ or a frame is smaller than the window
    """
    frames_a, frames_b = _as_frames(a), _as_frames(b)
    validate_same_shape(frames_a, frames_b, "b")
    if min(frames_a.shape[-2:]) < window:
        raise ShapeMismatch(f">= {window} x {window}", frames_a.shape[-2:], "frame")
    kernel = gaussian_window(window)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    return float(np.mean([_ssim_2d(fa, fb, kernel, c1, c2) for fa, fb in zip(frames_a, frames_b)]))


def paired_ssim(reals: Sequence[ImageLike], synthetics: Sequence[ImageLike]) -> float:
    """
    Mean clip SSIM over aligned pairs.

    Raises:
        LengthMismatch: If the two lists differ in length
        DataEmpty: If they are empty
    """
    if len(reals) != len(synthetics):
        raise LengthMismatch(len(reals), len(synthetics))
    if not reals:
        raise DataEmpty("No clip pairs for SSIM")
    return float(np.mean([ssim(r, s) for r, s in zip(reals, synthetics)]))


# ==================== Frechet distance ====================

@dataclass(frozen=True)
class GaussianSummary:
    """Mean [d] and symmetrised covariance [d, d] of a feature set."""
    mu: np.ndarray
    sigma: np.ndarray
    n: int

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])


def fit_gaussian(features: Union[np.ndarray, Sequence[Sequence[float]]]) -> GaussianSummary:
    """
    Sample mean and covariance with divisor n - 1.

    Raises:
        TooFewSamples: If fewer than two vectors are given
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 2:
        raise TooFewSamples(n, 2)
    mu = x.mean(axis=0)
    centered = x - mu
    sigma = centered.T @ centered / (n - 1)
    return GaussianSummary(mu=mu, sigma=(sigma + sigma.T) / 2.0, n=n)


def _eigh_psd(matrix: np.ndarray):
    """Eigendecomposition with negatives clipped to 0; the tolerance scales with the largest eigenvalue."""
    values, vectors = np.linalg.eigh(matrix)
    if values.size:
        scale = max(1.0, float(np.abs(values).max()))
        if values.min() < EIGEN_CLIP_TOLERANCE * scale:
            raise NotPSD(float(values.min()))
    return np.clip(values, 0.0, None), vectors


def _psd_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    return _eigh_psd(matrix)[0]


def _sqrtm_psd(matrix: np.ndarray) -> np.ndarray:
    values, vectors = _eigh_psd(matrix)
    return (vectors * np.sqrt(values)) @ vectors.T


def frechet_distance(g1: GaussianSummary, g2: GaussianSummary) -> float:
    """
    ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}).

    Tr((S1 S2)^{1/2}) is evaluated as the trace of the square root of the
    symmetric matrix S1^{1/2} S2 S1^{1/2}, via eigendecomposition.

    Raises:
        DimensionMismatch: If the summaries differ in dimension
        NotPSD: If an eigenvalue falls below the clipping tolerance
    """
    if g1.dim != g2.dim:
        raise DimensionMismatch(f"Feature dimensions differ: {g1.dim} vs {g2.dim}")
    root1 = _sqrtm_psd(g1.sigma)
    _psd_eigenvalues(g2.sigma)
    inner = root1 @ g2.sigma @ root1
    trace_root = float(np.sum(np.sqrt(_psd_eigenvalues((inner + inner.T) / 2.0))))
    diff = g1.mu - g2.mu
    value = float(diff @ diff + np.trace(g1.sigma) + np.trace(g2.sigma) - 2.0 * trace_root)
    return max(value, 0.0)


def frechet_feature_distance(
    real: Sequence[EchoClip],
    synthetic: Sequence[EchoClip],
    extractor: IFeatureExtractor,
    mode: FFDMode = FFDMode.PER_CLIP,
) -> float:
    """
    FFD between two clip sets under a frozen extractor.

    Raises:
        TooFewSamples: If either set yields fewer than two feature vectors
    """
    mode = FFDMode(mode)
    extract = extractor.frame_features if mode == FFDMode.PER_FRAME else extractor.clip_features
    distance = frechet_distance(fit_gaussian(extract(list(real))), fit_gaussian(extract(list(synthetic))))
    logger.debug(f"{FFD_LABELS[mode]} = {distance:.4f} ({len(real)} vs {len(synthetic)} clips)")
    return distance


# ==================== Feature extractor training ====================

@log_execution()
def train_feature_extractor(
    clips: Sequence[EchoClip],
    config: FeatureExtractorConfig = FeatureExtractorConfig(),
    progress: bool = False,
) -> ClipFeatureExtractor:
    """
    Train a clip autoencoder on real clips with MSE reconstruction and freeze its encoder.

    Raises:
        DataEmpty: If no clips are given
    """
    if not clips:
        raise DataEmpty("No clips for feature-extractor training")
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        model = ClipAutoencoder(config)
    generator = torch.Generator().manual_seed(config.seed)
    loader = DataLoader(ClipDataset(clips), batch_size=config.batch_size, shuffle=True, generator=generator)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)

    losses: List[float] = []
    model.train()
    for _ in tqdm(range(config.epochs), desc="features", disable=not progress):
        total = 0.0
        for batch in loader:
            optimizer.zero_grad(set_to_none=True)
            loss = F.mse_loss(model(batch), batch)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * batch.shape[0]
        losses.append(total / len(clips))
    logger.info(f"Feature extractor trained on {len(clips)} clip(s): reconstruction MSE {losses[-1]:.5f}")
    provenance = {
        "n_clips": len(clips),
        "epochs": config.epochs,
        "seed": config.seed,
        "final_loss": losses[-1],
    }
    return ClipFeatureExtractor(model, provenance)


__all__ = [
    'FFD_LABELS',
    'gaussian_window',
    'ssim',
    'paired_ssim',
    'GaussianSummary',
    'fit_gaussian',
    'frechet_distance',
    'frechet_feature_distance',
    'train_feature_extractor',
]
