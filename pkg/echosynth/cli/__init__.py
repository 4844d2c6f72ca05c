"""
Command-Line Interface
======================

YAML-driven pipeline commands with stable exit codes.
"""

from .run_config import RunConfig, load_run_config
from .commands import (
    COMMANDS,
    cmd_phantom_gen,
    cmd_import_pairs,
    cmd_train_uncond,
    cmd_train_control,
    cmd_sample,
    cmd_curate,
    cmd_train_ef,
    cmd_evaluate,
)
from .main import build_parser, run, main

__all__ = [
    'RunConfig',
    'load_run_config',
    'COMMANDS',
    'cmd_phantom_gen',
    'cmd_import_pairs',
    'cmd_train_uncond',
    'cmd_train_control',
    'cmd_sample',
    'cmd_curate',
    'cmd_train_ef',
    'cmd_evaluate',
    'build_parser',
    'run',
    'main',
]
