"""
External Paired Data
====================

Loader for externally supplied paired studies. Expected layout::

    root/
        ef.csv                 columns: case_id, ef [, split]
        <case_id>_a4c.npy      uint8 or float array [N, C, H, W] (or [N, H, W])
        <case_id>_a2c.npy      optional second view

Cases without an explicit split are assigned deterministically from
``split_seed``. Each case contributes the window starting at frame 0 of
each view; the remaining windows are available through preprocess_video.
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd

from ..config import Provenance, Split, View
from ..common.exceptions import MissingArtifact, ParseError, wrap_exception
from ..domain.models import CaseEntry, DatasetManifest
from .clip_store import save_clip
from .manifest import make_manifest, save_manifest
from .preprocessing import preprocess_clip

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _load_video(path: Path) -> np.ndarray:
    video = np.load(path)
    if video.ndim == 3:
        video = video[:, None]
    elif video.ndim == 4 and video.shape[-1] in (1, 3) and video.shape[1] not in (1, 3):
        video = np.moveaxis(video, -1, 1)  # [N, H, W, C] -> [N, C, H, W]
    return video


def assign_splits(case_ids: List[str], val_fraction: float, test_fraction: float, seed: int) -> Dict[str, Split]:
    """Deterministic random split assignment by case id."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(case_ids))
    n_test = int(round(len(case_ids) * test_fraction))
    n_val = int(round(len(case_ids) * val_fraction))
    splits: Dict[str, Split] = {}
    for rank, index in enumerate(order):
        if rank < n_test:
            splits[case_ids[index]] = Split.TEST
        elif rank < n_test + n_val:
            splits[case_ids[index]] = Split.VAL
        else:
            splits[case_ids[index]] = Split.TRAIN
    return splits


def load_external_pairs(
    root: PathLike,
    out_dir: PathLike,
    split_seed: int = 0,
    val_fraction: float = 0.1,
    test_fraction: float = 0.1,
) -> DatasetManifest:
    """
    Preprocess an external paired dataset into clip containers and a manifest.

    Args:
        root: Directory holding ef.csv and the .npy videos
        out_dir: Destination for clip containers and manifest.json
        split_seed: Seed for split assignment of rows without a split column
        val_fraction: Fraction of cases assigned to val
        test_fraction: Fraction of cases assigned to test

    Returns:
        The saved manifest

    Raises:
        MissingArtifact: If ef.csv or a required A4C video is missing
        ParseError: If ef.csv lacks required columns
    """
    root = Path(root)
    out_dir = Path(out_dir)
    table_path = root / "ef.csv"
    if not table_path.exists():
        raise MissingArtifact(str(table_path))
    try:
        table = pd.read_csv(table_path, dtype={"case_id": str})
    except (pd.errors.ParserError, ValueError) as e:
        raise wrap_exception(e, f"Cannot parse {table_path}", ParseError)
    missing = {"case_id", "ef"} - set(table.columns)
    if missing:
        raise ParseError(f"{table_path} lacks column(s) {sorted(missing)}")

    case_ids = table["case_id"].tolist()
    if "split" in table.columns:
        splits = {row.case_id: Split(row.split) for row in table.itertuples()}
    else:
        splits = assign_splits(case_ids, val_fraction, test_fraction, split_seed)

    records: List[CaseEntry] = []
    for row in table.itertuples():
        a4c_path = root / f"{row.case_id}_a4c.npy"
        if not a4c_path.exists():
            raise MissingArtifact(str(a4c_path))
        a4c = preprocess_clip(_load_video(a4c_path), 0, view=View.A4C, case_id=row.case_id)
        a4c_file = save_clip(a4c, out_dir / "clips" / f"{row.case_id}_a4c", Provenance.REAL)

        a2c_rel = None
        a2c_path = root / f"{row.case_id}_a2c.npy"
        if a2c_path.exists():
            a2c = preprocess_clip(_load_video(a2c_path), 0, view=View.A2C, case_id=row.case_id)
            a2c_file = save_clip(a2c, out_dir / "clips" / f"{row.case_id}_a2c", Provenance.REAL)
            a2c_rel = str(a2c_file.relative_to(out_dir))

        records.append(CaseEntry(
            case_id=row.case_id,
            a4c_path=str(a4c_file.relative_to(out_dir)),
            a2c_path=a2c_rel,
            ef_true=float(row.ef),
            split=splits[row.case_id],
            provenance=Provenance.REAL,
        ))

    manifest = make_manifest(records, split_seed=split_seed)
    save_manifest(manifest, out_dir / "manifest.json")
    logger.info(f"Imported {len(records)} external case(s): {manifest.counts}")
    return manifest


__all__ = [
    'assign_splits',
    'load_external_pairs',
]
