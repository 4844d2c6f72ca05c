"""
Domain Module
=============

Domain models and interfaces.
"""

from .models import (
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
    CasePrediction,
    EFReport,
    Candidate,
    CandidateRanking,
)
from .interfaces import (
    IClipGenerator,
    IEFPredictor,
    IFeatureExtractor,
)

__all__ = [
    # Models
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
    # Interfaces
    'IClipGenerator',
    'IEFPredictor',
    'IFeatureExtractor',
]
