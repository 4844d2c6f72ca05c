"""
Command-Line Entry Point
========================

    echosynth <command> [--config run.yaml] [--set key.sub=value ...] [--force]

Exit status: 0 success, 1 configuration error, 2 data error,
3 numerical failure.
"""

import argparse
import logging
import sys
from typing import List, Optional

from ..config import VERSION, ExitCode
from ..common.exceptions import EchoSynthException, exit_code_for
from ..common.logging_config import setup_logging
from .commands import COMMANDS
from .run_config import load_run_config

logger = logging.getLogger(__name__)

HELP = {
    "phantom-gen": "render the phantom dataset",
    "import-pairs": "preprocess an external paired dataset",
    "train-uncond": "phase 1: unconditional denoiser training",
    "train-control": "phase 2: control-branch training (or the pre-training ablation)",
    "sample": "sample synthetic A2C clips and export grids",
    "curate": "generate, score and select synthetic candidates",
    "train-ef": "train an EF regressor on one dataset composition",
    "evaluate": "EF and generative metric tables on the test split",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="echosynth", description="Controlled echo clip synthesis pipeline")
    parser.add_argument("--version", action="version", version=f"echosynth {VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=HELP[name])
        sub.add_argument("--config", "-c", default=None, help="YAML run file")
        sub.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
            help="override a config entry, e.g. control.train.max_iters=500 (repeatable)",
        )
        sub.add_argument("--force", action="store_true", help="overwrite a finished run in the output directory")
        sub.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one command and return its exit status."""
    args = build_parser().parse_args(argv)
    setup_logging(level=logging.DEBUG if args.verbose else logging.INFO, verbose=args.verbose)
    try:
        config = load_run_config(args.config, args.overrides)
        COMMANDS[args.command](config, args.force)
    except EchoSynthException as e:
        logger.error(f"{args.command}: {e}")
        return int(e.exit_code)
    except Exception as e:
        logger.exception(f"{args.command}: unexpected {type(e).__name__}: {e}")
        return int(exit_code_for(e))
    return int(ExitCode.SUCCESS)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()


__all__ = [
    'build_parser',
    'run',
    'main',
]
