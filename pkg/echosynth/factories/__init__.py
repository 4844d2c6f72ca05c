"""
echosynth Factories
===================

Registry-based construction of interchangeable components.
"""

from .backbone_factory import BackboneFactory

__all__ = ['BackboneFactory']
