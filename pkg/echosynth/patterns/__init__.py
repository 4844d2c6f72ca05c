"""
Design Patterns
===============

Context managers shared by the command-line pipeline.
"""

from .context import RunContext, timed_operation

__all__ = [
    'RunContext',
    'timed_operation',
]
