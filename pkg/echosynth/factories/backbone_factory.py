"""
Backbone Factory
================

Factory for EF regression backbones, keyed by EFBackboneKind.
New backbones are added through ``register_backbone``.
"""

import logging
from typing import Dict, Optional, Type

import torch

from ..config import EFBackboneKind
from ..common.exceptions import InvalidConfigError
from ..domain.models import EFBackboneConfig
from ..models.ef_backbones import EFRegressor, ResNet2Plus1DLike, Small3DCNN, TransformerLike, parameter_count

logger = logging.getLogger(__name__)


class BackboneFactory:
    """Creates EF regressors from an EFBackboneConfig."""

    _backbone_registry: Dict[str, Type[EFRegressor]] = {
        EFBackboneKind.SMALL3DCNN.value: Small3DCNN,
        EFBackboneKind.RESNET2PLUS1D_LIKE.value: ResNet2Plus1DLike,
        EFBackboneKind.TRANSFORMER_LIKE.value: TransformerLike,
    }

    @classmethod
    def create(cls, config: Optional[EFBackboneConfig] = None, seed: int = 0) -> EFRegressor:
        """
        Build a backbone with deterministic initialization.

        Raises:
            InvalidConfigError: If the backbone kind is not registered
        """
        config = config or EFBackboneConfig()
        kind = config.backbone.value if isinstance(config.backbone, EFBackboneKind) else str(config.backbone)
        if kind not in cls._backbone_registry:
            raise InvalidConfigError(
                f"Unknown backbone: '{kind}'. Available: {', '.join(cls._backbone_registry)}"
            )
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            model = cls._backbone_registry[kind](config)
        logger.info(f"Created {kind} EF backbone ({parameter_count(model):,} parameters)")
        return model

    @classmethod
    def register_backbone(cls, kind: str, backbone_class: type) -> None:
        """
        Register a new backbone class.

        Raises:
            InvalidConfigError: If the class is not an EFRegressor
        """
        if not (isinstance(backbone_class, type) and issubclass(backbone_class, EFRegressor)):
            raise InvalidConfigError("Backbone class must subclass EFRegressor")
        cls._backbone_registry[kind] = backbone_class
        logger.info(f"Registered EF backbone: {kind}")

    @classmethod
    def available(cls) -> list:
        return sorted(cls._backbone_registry)


__all__ = ['BackboneFactory']
