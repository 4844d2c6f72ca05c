"""
EF Regression
=============

Training, prediction and scoring of clip-level EF regressors. Single-plane
prediction uses one clip; biplane prediction averages the A4C and A2C
predictions of the same model. Predictions are clamped to [0, 100] only
when reported.
"""

import copy
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader
from tqdm import tqdm

from ..config import (
    EF_GRID_BATCH_SIZES,
    EF_GRID_EPOCHS,
    EF_GRID_LEARNING_RATES,
    EF_REPORT_MAX,
    EF_REPORT_MIN,
    EF_VAL_STUDIES,
    EFDatasetMode,
    Provenance,
)
from ..common.decorators import log_execution
from ..common.exceptions import (
    DataEmpty,
    DegenerateTargets,
    LengthMismatch,
    MissingArtifact,
    ParseError,
    ShapeMismatch,
    TooFewSamples,
    wrap_exception,
)
from ..domain.interfaces import IEFPredictor
from ..domain.models import (
    CasePrediction,
    CaseRecord,
    EchoClip,
    EFBackboneConfig,
    EFReport,
    EFTrainConfig,
)
from ..data.datasets import EFDataset, clips_to_batch
from ..factories.backbone_factory import BackboneFactory
from ..models.ef_backbones import EFRegressor

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
EFItem = Tuple[EchoClip, float]


# ==================== Prediction ====================

def _check_clip(model: EFRegressor, clip: EchoClip) -> None:
    expected = tuple(model.config.input_shape)
    if tuple(clip.frames.shape) != expected:
        raise ShapeMismatch(expected, tuple(clip.frames.shape), "clip")


@torch.no_grad()
def predict_batch(model: EFRegressor, clips: Sequence[EchoClip], batch_size: int = 16) -> np.ndarray:
    """Unclamped EF predictions for many clips."""
    for clip in clips:
        _check_clip(model, clip)
    model.eval()
    dtype = next(model.parameters()).dtype
    outputs = [
        model(clips_to_batch(clips[i:i + batch_size]).to(dtype)).double()
        for i in range(0, len(clips), batch_size)
    ]
    return torch.cat(outputs).numpy() if outputs else np.zeros(0)


def predict_ef(model: EFRegressor, clip: EchoClip) -> float:
    """
    Unclamped EF prediction for one clip.

    Raises:
        ShapeMismatch: If the clip does not match the backbone's input shape
    """
    return float(predict_batch(model, [clip])[0])


def predict_biplane(model: EFRegressor, a4c: EchoClip, a2c: EchoClip) -> float:
    """Mean of the single-view predictions."""
    return (predict_ef(model, a4c) + predict_ef(model, a2c)) / 2.0


class EFPredictor(IEFPredictor):
    """IEFPredictor backed by a trained regressor."""

    def __init__(self, model: EFRegressor):
        self.model = model

    def predict(self, clip: EchoClip) -> float:
        return predict_ef(self.model, clip)


# ==================== Metrics ====================

def compute_metrics(
    preds: Sequence[float],
    targets: Sequence[float],
    case_ids: Optional[Sequence[str]] = None,
) -> EFReport:
    """
    R^2 = 1 - SS_res / SS_tot, MAE and RMSE.

    Raises:
        LengthMismatch: If preds and targets differ in length
        TooFewSamples: If fewer than two pairs are given
        DegenerateTargets: If all targets are identical
    """
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise LengthMismatch(len(preds), len(targets))
    if len(preds) < 2:
        raise TooFewSamples(len(preds), 2)
    ss_tot = float(np.sum((targets - targets.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateTargets("R^2 is undefined for constant targets")

    residuals = preds - targets
    ss_res = float(np.sum(residuals ** 2))
    ids = list(case_ids) if case_ids is not None else [str(i) for i in range(len(preds))]
    return EFReport(
        r2=1.0 - ss_res / ss_tot,
        mae=float(np.mean(np.abs(residuals))),
        rmse=float(np.sqrt(np.mean(residuals ** 2))),
        predictions=tuple(
            CasePrediction(case_id=c, ef_true=float(t), ef_pred=float(p))
            for c, t, p in zip(ids, targets, preds)
        ),
    )


def clamp_ef(values: np.ndarray) -> np.ndarray:
    return np.clip(values, EF_REPORT_MIN, EF_REPORT_MAX)


def evaluate_cases(model: EFRegressor, cases: Sequence[CaseRecord], biplane: bool = False) -> EFReport:
    """
    Report-time evaluation: single-plane on A4C, or biplane when requested.

    Raises:
        DataEmpty: If biplane is requested and a case lacks an A2C clip
    """
    a4c = predict_batch(model, [case.a4c for case in cases])
    if biplane:
        if any(case.a2c is None for case in cases):
            raise DataEmpty("Biplane evaluation needs an A2C clip for every case")
        preds = (a4c + predict_batch(model, [case.a2c for case in cases])) / 2.0
    else:
        preds = a4c
    return compute_metrics(clamp_ef(preds), [case.ef_true for case in cases], [case.case_id for case in cases])


# ==================== Training data ====================

def ef_training_items(cases: Sequence[CaseRecord], mode: EFDatasetMode) -> List[EFItem]:
    """
    (clip, EF) pairs for a dataset composition.

    Each study contributes its A4C clip once (synthetic rows carry the real
    A4C of their conditioning case). Real A2C clips are added in the a4c_a2c
    modes and synthetic A2C clips in the synth modes.
    """
    mode = EFDatasetMode(mode)
    real = [case for case in cases if case.provenance != Provenance.SYNTHETIC]
    synthetic = [case for case in cases if case.provenance == Provenance.SYNTHETIC]
    seen = set()
    items: List[EFItem] = []
    for case in list(real) + list(synthetic):
        if case.case_id not in seen:
            seen.add(case.case_id)
            items.append((case.a4c, case.ef_true))
    if mode in (EFDatasetMode.A4C_A2C, EFDatasetMode.A4C_A2C_SYNTH_A2C):
        items += [(case.a2c, case.ef_true) for case in real if case.a2c is not None]
    if mode in (EFDatasetMode.A4C_SYNTH_A2C, EFDatasetMode.A4C_A2C_SYNTH_A2C):
        items += [(case.a2c, case.ef_true) for case in synthetic if case.a2c is not None]
    return items


def allocate_validation(
    cases: Sequence[CaseRecord],
    n_val: int = EF_VAL_STUDIES,
    seed: int = 0,
) -> Tuple[List[CaseRecord], List[CaseRecord]]:
    """
    Randomly hold out n_val studies, keeping every record of a study on one side.

    Synthetic records follow their conditioning case and never enter validation.
    """
    study_ids = sorted({case.case_id for case in cases if case.provenance != Provenance.SYNTHETIC})
    rng = np.random.default_rng(seed)
    held_out = set(rng.permutation(study_ids)[:min(n_val, len(study_ids))].tolist())
    train = [case for case in cases if case.case_id not in held_out]
    val = [case for case in cases if case.case_id in held_out and case.provenance != Provenance.SYNTHETIC]
    return train, val


# ==================== Training ====================

@dataclass
class EFTrainResult:
    model: EFRegressor
    config: EFTrainConfig
    val_curve: List[float] = field(default_factory=list)
    train_curve: List[float] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_mse(self) -> float:
        return self.val_curve[self.best_epoch]


@torch.no_grad()
def _mse(model: EFRegressor, items: Sequence[EFItem]) -> float:
    preds = predict_batch(model, [clip for clip, _ in items])
    targets = np.array([ef for _, ef in items], dtype=np.float64)
    return float(np.mean((preds - targets) ** 2))


@log_execution()
def train_ef(
    model: EFRegressor,
    train_items: Sequence[EFItem],
    val_items: Sequence[EFItem],
    config: EFTrainConfig,
    progress: bool = False,
) -> EFTrainResult:
    """
    Train with MSE loss; keep the weights of the epoch with the lowest val MSE.

    The head bias starts at the mean training EF. Ties in val MSE keep the
    earlier epoch.

    Raises:
        DataEmpty: If either split is empty
    """
    if not train_items:
        raise DataEmpty("No EF training items")
    if not val_items:
        raise DataEmpty("No EF validation items")

    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        model.head.bias.fill_(float(np.mean([ef for _, ef in train_items])))

    generator = torch.Generator().manual_seed(config.seed)
    loader = DataLoader(EFDataset(train_items), batch_size=config.batch_size, shuffle=True, generator=generator)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)

    result = EFTrainResult(model=model, config=config)
    best_state: Dict[str, torch.Tensor] = copy.deepcopy(model.state_dict())
    for epoch in tqdm(range(config.epochs), desc="ef", disable=not progress):
        model.train()
        total, count = 0.0, 0
        for clips, targets in loader:
            optimizer.zero_grad(set_to_none=True)
            loss = F.mse_loss(model(clips.to(dtype)), targets.to(dtype))
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(targets)
            count += len(targets)
        result.train_curve.append(total / count)
        result.val_curve.append(_mse(model, val_items))
        if result.val_curve[-1] < result.val_curve[result.best_epoch] or epoch == 0:
            result.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
        logger.debug(f"EF epoch {epoch + 1}/{config.epochs}: train={result.train_curve[-1]:.3f} val={result.val_curve[-1]:.3f}")

    model.load_state_dict(best_state)
    logger.info(f"EF training done: best epoch {result.best_epoch + 1}, val MSE {result.best_val_mse:.3f}")
    return result


def ef_grid(base: Optional[EFTrainConfig] = None) -> List[EFTrainConfig]:
    """Every (batch size, epochs, learning rate) combination of the search grid."""
    base = base or EFTrainConfig()
    return [
        base.model_copy(update={"batch_size": b, "epochs": e, "lr": lr})
        for b, e, lr in itertools.product(EF_GRID_BATCH_SIZES, EF_GRID_EPOCHS, EF_GRID_LEARNING_RATES)
    ]


@log_execution()
def run_grid(
    train_items: Sequence[EFItem],
    val_items: Sequence[EFItem],
    backbone: EFBackboneConfig,
    configs: Sequence[EFTrainConfig],
    progress: bool = False,
) -> Tuple[EFTrainResult, List[Dict[str, float]]]:
    """
    Train one model per config and return the best by val MSE plus a summary table.

    Raises:
        DataEmpty: If configs is empty or a split is empty
    """
    if not configs:
        raise DataEmpty("Empty hyperparameter grid")
    best: Optional[EFTrainResult] = None
    table: List[Dict[str, float]] = []
    for config in configs:
        model = BackboneFactory.create(backbone, seed=config.seed)
        result = train_ef(model, train_items, val_items, config, progress)
        table.append({
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "lr": config.lr,
            "best_epoch": result.best_epoch + 1,
            "val_mse": result.best_val_mse,
        })
        if best is None or result.best_val_mse < best.best_val_mse:
            best = result
    return best, table


# ==================== Persistence ====================

def save_ef_model(result: EFTrainResult, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "backbone": result.model.config.model_dump(mode="json"),
            "train_config": result.config.model_dump(mode="json"),
            "state_dict": result.model.state_dict(),
            "val_curve": result.val_curve,
            "best_epoch": result.best_epoch,
        },
        path,
    )
    logger.info(f"Saved EF model to {path}")
    return path


def load_ef_model(path: PathLike) -> EFRegressor:
    """
    Raises:
        MissingArtifact: If the file does not exist
        ParseError: If the archive is malformed
    """
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(str(path), produced_by="train-ef")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
        model = BackboneFactory.create(EFBackboneConfig.model_validate(payload["backbone"]))
        model.load_state_dict(payload["state_dict"])
    except (KeyError, RuntimeError, ValueError) as e:
        raise wrap_exception(e, f"Invalid EF model archive: {path}", ParseError)
    return model.eval()


def load_ef_train_config(path: PathLike) -> EFTrainConfig:
    """Training config stored with an EF model archive."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(str(path), produced_by="train-ef")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
        return EFTrainConfig.model_validate(payload["train_config"])
    except (KeyError, RuntimeError, ValueError) as e:
        raise wrap_exception(e, f"Invalid EF model archive: {path}", ParseError)


__all__ = [
    'predict_batch',
    'predict_ef',
    'predict_biplane',
    'EFPredictor',
    'compute_metrics',
    'clamp_ef',
    'evaluate_cases',
    'ef_training_items',
    'allocate_validation',
    'EFTrainResult',
    'train_ef',
    'ef_grid',
    'run_grid',
    'save_ef_model',
    'load_ef_model',
    'load_ef_train_config',
]
