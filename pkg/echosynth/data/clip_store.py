"""
Clip Container
==============

On-disk format for EchoClips. Each clip is two files:

``<name>.eclip``
    offset 0   4 bytes   magic ``b"ECLP"``
    offset 4   uint16    container version (little-endian)
    offset 6   uint16    ndim
    offset 8   ndim x uint32  shape, fixed order [T, C, H, W]
    then       float32 little-endian array, C order

``<name>.eclip.json``
    sidecar metadata record (view, case_id, frame_rate, provenance and
    free-form extras such as the generation seed).

The format is bit-exact: a save/load cycle returns identical float32 data.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from ..config import Provenance, View
from ..common.exceptions import MissingArtifact, ParseError, wrap_exception
from ..domain.models import EchoClip

logger = logging.getLogger(__name__)

MAGIC = b"ECLP"
CONTAINER_VERSION = 1
CLIP_SUFFIX = ".eclip"
SIDECAR_SUFFIX = ".json"

PathLike = Union[str, Path]


class ClipMetadata(BaseModel):
    """Sidecar record stored next to every clip container."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    container_version: int = CONTAINER_VERSION
    view: View
    case_id: str
    frame_rate: float = 0.0
    provenance: Provenance = Provenance.PHANTOM
    extra: Dict[str, Any] = {}


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + SIDECAR_SUFFIX)


def write_array(array: np.ndarray, path: PathLike) -> None:
    """Write a float32 array with the fixed-order shape header."""
    data = np.ascontiguousarray(array, dtype="<f4")
    header = MAGIC + struct.pack("<HH", CONTAINER_VERSION, data.ndim)
    header += struct.pack(f"<{data.ndim}I", *data.shape)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))


def read_array(path: PathLike) -> np.ndarray:
    """
    Read an array written by write_array.

    Raises:
        MissingArtifact: If the file does not exist
        ParseError: If the header or payload is malformed
    """
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(str(path))
    blob = path.read_bytes()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise ParseError(f"Not a clip container: {path}", {"path": str(path)})
    version, ndim = struct.unpack_from("<HH", blob, 4)
    if version != CONTAINER_VERSION:
        raise ParseError(
            f"Unsupported container version {version}",
            {"path": str(path), "version": version},
        )
    offset = 8 + 4 * ndim
    if len(blob) < offset:
        raise ParseError(f"Truncated header: {path}", {"path": str(path)})
    shape = struct.unpack_from(f"<{ndim}I", blob, 8)
    expected = int(np.prod(shape)) * 4
    if len(blob) - offset != expected:
        raise ParseError(
            f"Payload size {len(blob) - offset} does not match shape {shape}",
            {"path": str(path)},
        )
    return np.frombuffer(blob, dtype="<f4", offset=offset).reshape(shape).astype(np.float32)


def save_clip(
    clip: EchoClip,
    path: PathLike,
    provenance: Provenance = Provenance.PHANTOM,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Save a clip container and its sidecar.

    Returns:
        Path of the container file
    """
    path = Path(path)
    if path.suffix != CLIP_SUFFIX:
        path = path.with_name(path.name + CLIP_SUFFIX)
    write_array(clip.frames, path)
    metadata = ClipMetadata(
        view=clip.view,
        case_id=clip.case_id,
        frame_rate=clip.frame_rate,
        provenance=provenance,
        extra=extra or {},
    )
    sidecar_path(path).write_text(
        json.dumps(metadata.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path


def load_clip_metadata(path: PathLike) -> ClipMetadata:
    """Read the sidecar record of a clip container."""
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise MissingArtifact(str(meta_path))
    try:
        return ClipMetadata.model_validate_json(meta_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise wrap_exception(e, f"Invalid clip metadata: {meta_path}", ParseError)


def load_clip(path: PathLike) -> EchoClip:
    """
    Load a clip container into an EchoClip.

    Raises:
        MissingArtifact: If either file is missing
        ParseError: If the container or sidecar is malformed
    """
    frames = read_array(path)
    metadata = load_clip_metadata(path)
    try:
        return EchoClip(
            frames=frames,
            view=metadata.view,
            case_id=metadata.case_id,
            frame_rate=metadata.frame_rate,
        )
    except ValidationError as e:
        raise wrap_exception(e, f"Clip container holds an invalid clip: {path}", ParseError)


__all__ = [
    'MAGIC',
    'CONTAINER_VERSION',
    'CLIP_SUFFIX',
    'ClipMetadata',
    'sidecar_path',
    'write_array',
    'read_array',
    'save_clip',
    'load_clip',
    'load_clip_metadata',
]
