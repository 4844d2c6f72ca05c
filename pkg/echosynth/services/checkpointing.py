"""
Checkpointing
=============

Single-file training checkpoints written with ``torch.save``. The archive
is a dict with a versioned header and named blocks::

    header            {"format": "echosynth-checkpoint", "version": 1}
    phase, iteration  training phase and completed iterations
    unet_config       UNetConfig as JSON-compatible dict
    train_config      TrainConfig as JSON-compatible dict
    schedule          {"kind", "T", "beta"}
    host              host U-Net state dict (parameter names per models.unet)
    branch            control branch state dict or None
    optimizer         optimizer state dict or None
    generator_state   torch.Generator state (uint8 tensor)
    loss_history      per-iteration losses
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import torch

from ..config import TrainPhase
from ..common.exceptions import MissingArtifact, ParseError, wrap_exception
from ..domain.models import TrainConfig, UNetConfig
from ..diffusion.schedule import NoiseSchedule
from ..models.control import ControlNetBranch, init_control_branch
from ..models.unet import UNet3D, build_unet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CHECKPOINT_FORMAT = "echosynth-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    """Everything needed to resume training or to sample."""
    phase: TrainPhase
    iteration: int
    unet_config: UNetConfig
    train_config: TrainConfig
    schedule: NoiseSchedule
    host_state: Dict[str, torch.Tensor]
    branch_state: Optional[Dict[str, torch.Tensor]] = None
    optimizer_state: Optional[Dict[str, Any]] = None
    generator_state: Optional[torch.Tensor] = None
    loss_history: List[float] = field(default_factory=list)
    schema_version: int = CHECKPOINT_VERSION

    def build_host(self) -> UNet3D:
        net = build_unet(self.unet_config)
        net.to(next(iter(self.host_state.values())).dtype)
        net.load_state_dict(self.host_state)
        return net

    def build_branch(self, host: Optional[UNet3D] = None) -> Optional[ControlNetBranch]:
        if self.branch_state is None:
            return None
        branch = init_control_branch(host or self.build_host())
        branch.load_state_dict(self.branch_state)
        return branch

    def save(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "header": {"format": CHECKPOINT_FORMAT, "version": self.schema_version},
            "phase": self.phase.value,
            "iteration": self.iteration,
            "unet_config": self.unet_config.model_dump(mode="json"),
            "train_config": self.train_config.model_dump(mode="json"),
            "schedule": self.schedule.to_state(),
            "host": self.host_state,
            "branch": self.branch_state,
            "optimizer": self.optimizer_state,
            "generator_state": self.generator_state,
            "loss_history": list(self.loss_history),
        }
        tmp = path.with_suffix(path.suffix + ".tmp")
        torch.save(payload, tmp)
        tmp.replace(path)
        logger.info(f"Saved {self.phase.value} checkpoint at iteration {self.iteration} to {path}")
        return path

    @classmethod
    def load(cls, path: PathLike) -> "Checkpoint":
        """
        Raises:
            MissingArtifact: If the file does not exist
            ParseError: If the archive is malformed or of another version
        """
        path = Path(path)
        if not path.exists():
            raise MissingArtifact(str(path))
        try:
            payload = torch.load(path, map_location="cpu", weights_only=False)
        except Exception as e:
            raise wrap_exception(e, f"Cannot read checkpoint {path}", ParseError)

        header = payload.get("header", {}) if isinstance(payload, dict) else {}
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ParseError(f"Not an echosynth checkpoint: {path}")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ParseError(
                f"Unsupported checkpoint version {header.get('version')!r}",
                {"path": str(path), "expected": CHECKPOINT_VERSION},
            )
        try:
            return cls(
                phase=TrainPhase(payload["phase"]),
                iteration=int(payload["iteration"]),
                unet_config=UNetConfig.model_validate(payload["unet_config"]),
                train_config=TrainConfig.model_validate(payload["train_config"]),
                schedule=NoiseSchedule.from_state(payload["schedule"]),
                host_state=payload["host"],
                branch_state=payload.get("branch"),
                optimizer_state=payload.get("optimizer"),
                generator_state=payload.get("generator_state"),
                loss_history=list(payload.get("loss_history", [])),
                schema_version=header["version"],
            )
        except (KeyError, ValueError, TypeError) as e:
            raise wrap_exception(e, f"Malformed checkpoint {path}", ParseError)


def state_dict_copy(module: torch.nn.Module) -> Dict[str, torch.Tensor]:
    """Detached clone of a module's state dict."""
    return {name: tensor.detach().clone() for name, tensor in module.state_dict().items()}


__all__ = [
    'CHECKPOINT_FORMAT',
    'CHECKPOINT_VERSION',
    'Checkpoint',
    'state_dict_copy',
]
