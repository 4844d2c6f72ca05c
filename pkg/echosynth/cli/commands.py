"""
Commands
========

One function per CLI subcommand. Each takes a validated RunConfig, works
inside a RunContext (output guard, run.log, resolved_config.yaml,
summary.json) and returns the summary it recorded.

Outputs live under ``<output_root>/<run_name>/<command>``; upstream
artifacts default to the locations earlier commands of the same run wrote,
so one config file drives the whole pipeline:

    phantom-gen -> train-ef (a4c_a2c) -> train-uncond -> train-control
    -> curate -> train-ef (a4c_synth_a2c) -> evaluate
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..config import EFDatasetMode, FFDMode, Provenance, Split
from ..common.decorators import log_execution
from ..common.exceptions import ConfigError, DataEmpty, MissingArtifact
from ..domain.models import CaseRecord, DatasetManifest, EchoClip
from ..data.clip_store import save_clip
from ..data.external_loader import load_external_pairs
from ..data.manifest import load_cases, load_manifest, save_manifest
from ..factories.backbone_factory import BackboneFactory
from ..models.control import ControlledGenerator, init_control_branch
from ..patterns.context import RunContext, timed_operation
from ..phantom.generator import generate_phantom_dataset
from ..services.checkpointing import Checkpoint
from ..services.curation import (
    build_augmented_manifest,
    candidate_seed,
    generate_candidates,
    rankings_table,
    select_top_k,
)
from ..services.diffusion_trainer import run_ablation, smoothed_losses, train_conditional, train_unconditional
from ..services.ef_regression import (
    EFPredictor,
    allocate_validation,
    ef_grid,
    ef_training_items,
    evaluate_cases,
    load_ef_model,
    load_ef_train_config,
    run_grid,
    save_ef_model,
    train_ef,
)
from ..services.eval_metrics import (
    FFD_LABELS,
    frechet_feature_distance,
    paired_ssim,
    ssim,
    train_feature_extractor,
)
from ..services.reporting import (
    ef_report_table,
    ef_report_text,
    export_gif,
    export_grid,
    format_table,
    metrics_table,
    summarize_reports,
    write_table,
    write_text,
)
from ..models.unet import build_unet
from .run_config import RunConfig

logger = logging.getLogger(__name__)

SYNTH_MODES = (EFDatasetMode.A4C_SYNTH_A2C, EFDatasetMode.A4C_A2C_SYNTH_A2C)
SCORING_MODE = EFDatasetMode.A4C


# ==================== Artifact resolution ====================

def _require(path: Path, produced_by: str) -> Path:
    if not Path(path).exists():
        raise MissingArtifact(str(path), produced_by=produced_by)
    return Path(path)


def _dataset_manifest_path(config: RunConfig) -> Path:
    if config.data.manifest:
        return _require(Path(config.data.manifest), "phantom-gen")
    if config.data.external_root:
        return _require(config.command_dir("import-pairs", "manifest.json"), "import-pairs")
    return _require(config.command_dir("phantom-gen", "manifest.json"), "phantom-gen")


def _load(path: Path) -> Tuple[DatasetManifest, Path]:
    return load_manifest(path), path


def _paired(cases: List[CaseRecord]) -> List[CaseRecord]:
    return [case for case in cases if case.a2c is not None]


def _a2c_corpus(config: RunConfig) -> List[EchoClip]:
    """Training A2C clips of the unconditional corpus (the dataset itself unless internal_manifest is set)."""
    path = Path(config.data.internal_manifest) if config.data.internal_manifest else _dataset_manifest_path(config)
    manifest, path = _load(_require(path, "phantom-gen"))
    clips = [case.a2c for case in _paired(load_cases(manifest, path, Split.TRAIN))]
    if not clips:
        raise DataEmpty(f"No training A2C clips in {path}")
    return clips


def _generator_from(config: RunConfig, checkpoint_path: Path) -> ControlledGenerator:
    checkpoint = Checkpoint.load(_require(checkpoint_path, "train-control"))
    if checkpoint.branch_state is None:
        raise ConfigError(f"{checkpoint_path} holds no control branch; use a train-control checkpoint")
    host = checkpoint.build_host()
    return ControlledGenerator(
        host,
        checkpoint.build_branch(host),
        checkpoint.schedule,
        sigma=config.control.mask_sigma,
        variance=config.schedule.variance,
        device=config.device,
        progress=config.progress,
    )


def _control_checkpoint(config: RunConfig, explicit: Optional[str]) -> Path:
    return Path(explicit) if explicit else config.command_dir("train-control", "final.pt")


def _loss_table(history: List[float]) -> pd.DataFrame:
    return pd.DataFrame({
        "iteration": np.arange(1, len(history) + 1),
        "loss": history,
        "smoothed": smoothed_losses(history),
    })


def _loss_summary(checkpoint: Checkpoint) -> Dict[str, Any]:
    smoothed = smoothed_losses(checkpoint.loss_history)
    return {
        "iterations": checkpoint.iteration,
        "initial_smoothed_loss": smoothed[0] if smoothed else None,
        "final_smoothed_loss": smoothed[-1] if smoothed else None,
    }


# ==================== Data commands ====================

@log_execution()
def cmd_phantom_gen(config: RunConfig, force: bool = False) -> Dict[str, Any]:
    """Render the phantom dataset and its manifest."""
    out_dir = config.command_dir("phantom-gen")
    with RunContext(out_dir, "phantom-gen", config.resolved(), force) as run:
        p = config.phantom
        manifest = generate_phantom_dataset(
            p.n_train, p.n_val, p.n_test, p.ef_range, config.seed, out_dir, p.noise_sigma, p.workers,
        )
        run.summary.update(counts=manifest.counts, manifest=str(run.path("manifest.json")))
        return run.summary


@log_execution()
def cmd_import_pairs(config: RunConfig, force: bool = False) -> Dict[str, Any]:
    """Preprocess an externally supplied paired dataset (data.external_root)."""
    if not config.data.external_root:
        raise ConfigError("import-pairs needs data.external_root")
    out_dir = config.command_dir("import-pairs")
    with RunContext(out_dir, "import-pairs", config.resolved(), force) as run:
        manifest = load_external_pairs(
            config.data.external_root,
            out_dir,
            split_seed=config.seed,
            val_fraction=config.data.val_fraction,
            test_fraction=config.data.test_fraction,
        )
        run.summary.update(counts=manifest.counts, manifest=str(run.path("manifest.json")))
        return run.summary


# ==================== Diffusion commands ====================

@log_execution()
def cmd_train_uncond(config: RunConfig, force: bool = False) -> Dict[str, Any]:
    """Phase 1: unconditional host training on A2C clips."""
    with RunContext(config.command_dir("train-uncond"), "train-uncond", config.resolved(), force) as run:
        clips = _a2c_corpus(config)
        schedule = config.schedule.build()
        train_config = config.uncond.train.model_copy(update={"progress": config.uncond.train.progress or config.progress})
        resume = Checkpoint.load(config.uncond.resume) if config.uncond.resume else None
        net = build_unet(config.unet, seed=train_config.seed)

        checkpoint = train_unconditional(
            net, clips, schedule, train_config, checkpoint_dir=run.path("checkpoints"), resume=resume,
        )
        checkpoint.save(run.path("final.pt"))
        write_table(_loss_table(checkpoint.loss_history), run.path("loss_history.csv"))
        run.summary.update(n_clips=len(clips), checkpoint=str(run.path("final.pt")), **_loss_summary(checkpoint))
        return run.summary


@log_execution()
def cmd_train_control(config: RunConfig, force: bool = False) -> Dict[str, Any]:
    """
    Phase 2: attach a control branch to the phase-1 host and train on pairs.

    With control.ablation the four pre-training rows are trained from
    scratch instead and saved under ``ablation/<row>.pt``.
    """
    with RunContext(config.command_dir("train-control"), "train-control", config.resolved(), force) as run:
        manifest, manifest_path = _load(_dataset_manifest_path(config))
        pairs = _paired(load_cases(manifest, manifest_path, Split.TRAIN))
        if not pairs:
            raise DataEmpty("No paired training cases for conditional training")
        sigma = config.control.mask_sigma
        progress = config.control.train.progress or config.progress
        cond_config = config.control.train.model_copy(update={"progress": progress})

        if config.control.ablation:
            if not config.data.internal_manifest:
                logger.warning("No data.internal_manifest: the internal and paired_only hosts see the same clips")
            uncond_config = config.uncond.train.model_copy(update={"progress": progress})
            results = run_ablation(
                config.unet, config.schedule.build(), uncond_config, cond_config,
                _a2c_corpus(config), pairs, out_dir=run.path("ablation"), sigma=sigma,
            )
            for row, checkpoint in results.items():
                write_table(_loss_table(checkpoint.loss_history), run.path("ablation", f"{row}_loss.csv"))
            run.summary.update(n_pairs=len(pairs), ablation={row: _loss_summary(c) for row, c in results.items()})
            return run.summary

        host_path = Path(config.control.host_checkpoint or config.command_dir("train-uncond", "final.pt"))
        host_checkpoint = Checkpoint.load(_require(host_path, "train-uncond"))
        host = host_checkpoint.build_host()
        branch = init_control_branch(host)
        resume = Checkpoint.load(config.control.resume) if config.control.resume else None

        checkpoint = train_conditional(
            host, branch, pairs, host_checkpoint.schedule, cond_config, sigma,
            checkpoint_dir=run.path("checkpoints"), resume=resume,
        )
        checkpoint.save(run.path("final.pt"))
        write_table(_loss_table(checkpoint.loss_history), run.path("loss_history.csv"))
        run.summary.update(
            n_pairs=len(pairs),
            host_checkpoint=str(host_path),
            checkpoint=str(run.path("final.pt")),
            **_loss_summary(checkpoint),
        )
        return run.summary


@log_execution()
def cmd_sample(config: RunConfig, force: bool = False) -> Dict[str, Any]:
    """Sample A2C clips for a few cases and export grids and GIFs."""
    s = config.sample
    with RunContext(config.command_dir("sample"), "sample", config.resolved(), force) as run:
        generator = _generator_from(config, _control_checkpoint(config, s.checkpoint))
        manifest, manifest_path = _load(_dataset_manifest_path(config))
        cases = load_cases(manifest, manifest_path, s.split)[:s.n_cases]
        if not cases:
            raise DataEmpty(f"No {s.split.value} cases to condition on")

        rows = []
        for case in cases:
            seed = candidate_seed(config.seed, case.case_id, 0)
            with timed_operation(f"sampling {case.case_id}"):
                samples = generator.generate_many(case.a4c, s.per_case, seed)
            for j, clip in enumerate(samples):
                name = f"{case.case_id}_s{j:02d}"
                save_clip(clip, run.path("clips", name), Provenance.SYNTHETIC,
                          {"seed": seed, "sample_index": j, "source_case_id": case.case_id})
                if s.gif:
                    export_gif(clip, run.path("gifs", f"{name}.gif"), s.frame_ms)
                rows.append({
                    "case_id": case.case_id,
                    "sample_index": j,
                    "seed": seed,
                    "ssim_to_real": ssim(case.a2c, clip) if case.a2c is not None else None,
                })
            sheet = [case.a4c] + ([case.a2c] if case.a2c is not None else []) + samples
            export_grid(sheet, run.path("grids", f"{case.case_id}.png"))

        write_table(pd.DataFrame(rows), run.path("samples.csv"))
        run.summary.update(n_cases=len(cases), n_samples=len(rows))
        return run.summary


# ==================== Curation ====================

@log_execution()
def cmd_curate(config: RunConfig, force: bool = False) -> Dict[str, Any]:
    """Generate, score and select synthetic A2C clips per training case."""
    c = config.curate
    with RunContext(config.command_dir("curate"), "curate", config.resolved(), force) as run:
        generator = _generator_from(config, _control_checkpoint(config, c.checkpoint))
        ef_path = Path(c.ef_model or config.command_dir("train-ef", SCORING_MODE.value, "ef_model.pt"))
        predictor = EFPredictor(load_ef_model(_require(ef_path, "train-ef")))
        manifest, manifest_path = _load(_dataset_manifest_path(config))
        cases = load_cases(manifest, manifest_path, Split.TRAIN)
        if not cases:
            raise DataEmpty("No training cases to curate")

        rankings = []
        for case in tqdm(cases, desc="curate", disable=not config.progress):
            ranking = generate_candidates(case, generator, predictor, c.n_candidates, config.seed, run.out_dir)
            rankings.append(select_top_k(ranking, c.top_k))

        augmented = build_augmented_manifest(
            manifest, rankings, c.mode, base_dir=manifest_path.parent, out_dir=run.out_dir,
        )
        save_manifest(augmented, run.path("manifest.json"))
        table = rankings_table(rankings)
        write_table(table, run.path("rankings.csv"))
        run.summary.update(
            n_cases=len(cases),
            n_candidates=c.n_candidates,
            top_k=c.top_k,
            mode=c.mode.value,
            ef_model=str(ef_path),
            counts=augmented.counts,
            mean_abs_error_all=float(table["abs_error"].mean()),
            mean_abs_error_selected=float(table.loc[table["selected"], "abs_error"].mean()) if table["selected"].any() else None,
            manifest=str(run.path("manifest.json")),
        )
        return run.summary


# ==================== EF regression ====================

def _ef_manifest_path(config: RunConfig, mode: EFDatasetMode) -> Path:
    if config.ef.manifest:
        return _require(Path(config.ef.manifest), "curate")
    if mode in SYNTH_MODES:
        return _require(config.command_dir("curate", "manifest.json"), "curate")
    return _dataset_manifest_path(config)


@log_execution()
def cmd_train_ef(config: RunConfig, force: bool = False) -> Dict[str, Any]:
    """
    Train an EF regressor on one dataset composition (ef.train.dataset_mode).

    Validation comes from the base dataset: its val split when present,
    otherwise ef.n_val training studies held out with ef.train.seed. The
    held-out studies are the same for every composition, and their
    synthetic rows are dropped from training.
    """
    mode = config.ef.train.dataset_mode
    with RunContext(config.command_dir("train-ef", mode.value), "train-ef", config.resolved(), force) as run:
        base, base_path = _load(_dataset_manifest_path(config))
        base_train = load_cases(base, base_path, Split.TRAIN)
        val_cases = load_cases(base, base_path, Split.VAL)
        if not val_cases:
            _, val_cases = allocate_validation(base_train, config.ef.n_val, config.ef.train.seed)
        held_out = {case.case_id for case in val_cases}

        manifest_path = _ef_manifest_path(config, mode)
        if manifest_path.resolve() == base_path.resolve():
            candidates = base_train
        else:
            candidates = load_cases(load_manifest(manifest_path), manifest_path, Split.TRAIN)
        train_cases = [case for case in candidates if case.case_id not in held_out]
        train_items = ef_training_items(train_cases, mode)
        val_items = ef_training_items(val_cases, mode)

        if config.ef.grid:
            result, grid = run_grid(train_items, val_items, config.ef.backbone, ef_grid(config.ef.train), config.progress)
            write_table(pd.DataFrame(grid), run.path("grid.csv"))
        else:
            model = BackboneFactory.create(config.ef.backbone, seed=config.ef.train.seed)
            result = train_ef(model, train_items, val_items, config.ef.train, config.progress)

        save_ef_model(result, run.path("ef_model.pt"))
        write_table(pd.DataFrame({
            "epoch": np.arange(1, len(result.val_curve) + 1),
            "train_mse": result.train_curve,
            "val_mse": result.val_curve,
        }), run.path("curves.csv"))
        run.summary.update(
            dataset_mode=mode.value,
            n_train_items=len(train_items),
            n_val_items=len(val_items),
            best_epoch=result.best_epoch + 1,
            best_val_mse=result.best_val_mse,
            selected_config=result.config.model_dump(mode="json"),
            ef_model=str(run.path("ef_model.pt")),
        )
        return run.summary


# ==================== Evaluation ====================

def _discover(pattern_dir: Path, pattern: str, name: Callable[[Path], str]) -> Dict[str, str]:
    if not pattern_dir.exists():
        return {}
    return {name(path): str(path) for path in sorted(pattern_dir.glob(pattern))}


def _ef_models(config: RunConfig) -> Dict[str, str]:
    if config.evaluate.ef_models:
        return dict(config.evaluate.ef_models)
    return _discover(config.command_dir("train-ef"), "*/ef_model.pt", lambda p: p.parent.name)


def _control_checkpoints(config: RunConfig) -> Dict[str, str]:
    if config.evaluate.checkpoints:
        return dict(config.evaluate.checkpoints)
    rows = _discover(config.command_dir("train-control", "ablation"), "*.pt", lambda p: p.stem)
    final = config.command_dir("train-control", "final.pt")
    if final.exists():
        rows.setdefault("control", str(final))
    return rows


def _evaluate_ef(config: RunConfig, run: RunContext, test_cases: List[CaseRecord]) -> Dict[str, Dict[str, float]]:
    reports = {}
    for name, path in _ef_models(config).items():
        model = load_ef_model(path)
        mode = load_ef_train_config(path).dataset_mode
        biplane = config.evaluate.biplane if config.evaluate.biplane is not None else mode != EFDatasetMode.A4C
        report = evaluate_cases(model, test_cases, biplane=biplane)
        title = f"EF regression: {name} ({'biplane' if biplane else 'single-plane'})"
        write_text(ef_report_text(report, title), run.path(f"ef_report_{name}.txt"))
        write_table(ef_report_table(report), run.path(f"ef_predictions_{name}.csv"))
        reports[name] = report
    if not reports:
        return {}
    table = summarize_reports(reports)
    write_table(table, run.path("ef_metrics.csv"), index=True)
    write_text(format_table(table, "EF regression on the test split"), run.path("ef_metrics.txt"))
    return {name: {"r2": r.r2, "mae": r.mae, "rmse": r.rmse} for name, r in reports.items()}


def _evaluate_generative(config: RunConfig, run: RunContext, manifest: DatasetManifest, manifest_path: Path,
                         test_cases: List[CaseRecord]) -> Dict[str, Dict[str, float]]:
    checkpoints = _control_checkpoints(config)
    eval_cases = _paired(test_cases)[:config.evaluate.n_eval_cases]
    if not checkpoints or len(eval_cases) < 2:
        logger.warning("Skipping generative metrics: no control checkpoints or fewer than two paired test cases")
        return {}

    real_train = [case.a2c for case in _paired(load_cases(manifest, manifest_path, Split.TRAIN))]
    extractor = train_feature_extractor(real_train, config.evaluate.features, config.progress)
    extractor.save(run.path("feature_extractor.pt"))
    reals = [case.a2c for case in eval_cases]

    rows: Dict[str, Dict[str, float]] = {}
    for row, path in checkpoints.items():
        generator = _generator_from(config, Path(path))
        with timed_operation(f"sampling {len(eval_cases)} clip(s) for {row}"):
            synthetic = [generator.generate(case.a4c, candidate_seed(config.seed, case.case_id, 0)) for case in eval_cases]
        rows[row] = {
            FFD_LABELS[FFDMode.PER_FRAME]: frechet_feature_distance(reals, synthetic, extractor, FFDMode.PER_FRAME),
            FFD_LABELS[FFDMode.PER_CLIP]: frechet_feature_distance(reals, synthetic, extractor, FFDMode.PER_CLIP),
            "SSIM": paired_ssim(reals, synthetic),
        }
    table = metrics_table(rows)
    write_table(table, run.path("generative_metrics.csv"), index=True)
    write_text(format_table(table, "Generative quality on the test split"), run.path("generative_metrics.txt"))
    return rows


@log_execution()
def cmd_evaluate(config: RunConfig, force: bool = False) -> Dict[str, Any]:
    """
    EF tables for every trained EF model and generative metrics for every
    control checkpoint of the run, all on the test split.

    Raises:
        MissingArtifact: If there is nothing to evaluate
    """
    with RunContext(config.command_dir("evaluate"), "evaluate", config.resolved(), force) as run:
        manifest, manifest_path = _load(_dataset_manifest_path(config))
        test_cases = load_cases(manifest, manifest_path, Split.TEST)
        if not test_cases:
            raise DataEmpty("No test cases to evaluate on")

        ef_rows = _evaluate_ef(config, run, test_cases)
        generative_rows = _evaluate_generative(config, run, manifest, manifest_path, test_cases) if config.evaluate.generative else {}
        if not ef_rows and not generative_rows:
            raise MissingArtifact(str(config.command_dir("train-ef")), produced_by="train-ef")
        run.summary.update(n_test_cases=len(test_cases), ef=ef_rows, generative=generative_rows)
        return run.summary


COMMANDS: Dict[str, Callable[[RunConfig, bool], Dict[str, Any]]] = {
    "phantom-gen": cmd_phantom_gen,
    "import-pairs": cmd_import_pairs,
    "train-uncond": cmd_train_uncond,
    "train-control": cmd_train_control,
    "sample": cmd_sample,
    "curate": cmd_curate,
    "train-ef": cmd_train_ef,
    "evaluate": cmd_evaluate,
}


__all__ = [
    'COMMANDS',
    'cmd_phantom_gen',
    'cmd_import_pairs',
    'cmd_train_uncond',
    'cmd_train_control',
    'cmd_sample',
    'cmd_curate',
    'cmd_train_ef',
    'cmd_evaluate',
]
