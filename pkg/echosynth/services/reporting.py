"""
Reporting
=========

Sample export (PNG sheets and GIF animations) and tabular reports.
Pixel values map from [-1, 1] to 8-bit grayscale.
"""

import logging
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from PIL import Image

from ..common.exceptions import DataEmpty
from ..domain.models import EchoClip, EFReport
from ..data.preprocessing import to_uint8

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _gray_frames(clip: EchoClip) -> np.ndarray:
    """[T, H, W] uint8 frames of a single-channel clip."""
    return to_uint8(np.asarray(clip.frames))[:, 0]


def export_grid(clips: Sequence[EchoClip], path: PathLike, padding: int = 2) -> Path:
    """
    One row per clip, one column per frame, saved as a grayscale PNG.

    Raises:
        DataEmpty: If clips is empty
    """
    if not clips:
        raise DataEmpty("Nothing to export")
    rows = [_gray_frames(clip) for clip in clips]
    n_frames, height, width = rows[0].shape
    sheet = np.zeros(
        (len(rows) * (height + padding) + padding, n_frames * (width + padding) + padding),
        dtype=np.uint8,
    )
    for r, frames in enumerate(rows):
        for c, frame in enumerate(frames):
            top = padding + r * (height + padding)
            left = padding + c * (width + padding)
            sheet[top:top + height, left:left + width] = frame
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(sheet, mode="L").save(path)
    logger.debug(f"Wrote {len(rows)}x{n_frames} grid to {path}")
    return path


def export_gif(clip: EchoClip, path: PathLike, frame_ms: int = 80) -> Path:
    """Looping GIF of one clip; 8-bit grayscale fits the palette without loss."""
    frames = [Image.fromarray(frame, mode="L") for frame in _gray_frames(clip)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames[0].save(path, save_all=True, append_images=frames[1:], duration=frame_ms, loop=0, optimize=False)
    return path


def ef_report_table(report: EFReport) -> pd.DataFrame:
    """Per-case table: case_id, ef_true, ef_pred, abs_error."""
    table = pd.DataFrame(
        [p.model_dump() for p in report.predictions],
        columns=["case_id", "ef_true", "ef_pred"],
    )
    table["abs_error"] = (table["ef_pred"] - table["ef_true"]).abs()
    return table


def ef_report_text(report: EFReport, title: str = "EF regression") -> str:
    lines = [
        title,
        "=" * len(title),
        f"R2    {report.r2:8.4f}",
        f"MAE   {report.mae:8.4f}",
        f"RMSE  {report.rmse:8.4f}",
        f"cases {len(report.predictions):8d}",
    ]
    return "\n".join(lines) + "\n"


def metrics_table(rows: Mapping[str, Mapping[str, float]], index_name: str = "configuration") -> pd.DataFrame:
    """Rows keyed by configuration name, one column per metric."""
    table = pd.DataFrame.from_dict({k: dict(v) for k, v in rows.items()}, orient="index")
    table.index.name = index_name
    return table


def write_table(table: pd.DataFrame, path: PathLike, index: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=index, float_format="%.6f")
    return path


def write_text(text: str, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def format_table(table: pd.DataFrame, title: Optional[str] = None, floatfmt: str = "{:.4f}") -> str:
    body = table.to_string(float_format=lambda v: floatfmt.format(v))
    if title:
        return f"{title}\n{'=' * len(title)}\n{body}\n"
    return body + "\n"


def summarize_reports(reports: Dict[str, EFReport]) -> pd.DataFrame:
    """R2/MAE/RMSE per training configuration."""
    return metrics_table({name: {"R2": r.r2, "MAE": r.mae, "RMSE": r.rmse} for name, r in reports.items()})


__all__ = [
    'export_grid',
    'export_gif',
    'ef_report_table',
    'ef_report_text',
    'metrics_table',
    'write_table',
    'write_text',
    'format_table',
    'summarize_reports',
]
