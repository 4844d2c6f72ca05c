"""
Phantom Module
==============

Procedural paired A4C/A2C studies with analytically known EF.
"""

from .generator import (
    area_trace,
    render_phantom_video,
    measure_lv_area,
    measure_ef,
    generate_phantom_case,
    phantom_spec_for_ef,
    generate_phantom_dataset,
)

__all__ = [
    'area_trace',
    'render_phantom_video',
    'measure_lv_area',
    'measure_ef',
    'generate_phantom_case',
    'phantom_spec_for_ef',
    'generate_phantom_dataset',
]
