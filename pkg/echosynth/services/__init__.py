"""
echosynth Services
==================

Training, curation, evaluation and reporting built on the models and data layers.
"""

from .lr_schedule import lr_at, apply_lr
from .checkpointing import Checkpoint, state_dict_copy
from .diffusion_trainer import (
    ABLATION_ROWS,
    smoothed_losses,
    train_unconditional,
    train_conditional,
    pretrain_host,
    run_ablation,
)
from .ef_regression import (
    predict_batch,
    predict_ef,
    predict_biplane,
    EFPredictor,
    compute_metrics,
    clamp_ef,
    evaluate_cases,
    ef_training_items,
    allocate_validation,
    EFTrainResult,
    train_ef,
    ef_grid,
    run_grid,
    save_ef_model,
    load_ef_model,
    load_ef_train_config,
)
from .curation import (
    candidate_seed,
    synthetic_case_id,
    generate_candidates,
    select_top_k,
    build_augmented_manifest,
    rankings_table,
)
from .eval_metrics import (
    FFD_LABELS,
    ssim,
    paired_ssim,
    GaussianSummary,
    fit_gaussian,
    frechet_distance,
    frechet_feature_distance,
    train_feature_extractor,
)
from .reporting import (
    export_grid,
    export_gif,
    ef_report_table,
    ef_report_text,
    metrics_table,
    write_table,
    write_text,
    format_table,
    summarize_reports,
)

__all__ = [
    'lr_at',
    'apply_lr',
    'Checkpoint',
    'state_dict_copy',
    'ABLATION_ROWS',
    'smoothed_losses',
    'train_unconditional',
    'train_conditional',
    'pretrain_host',
    'run_ablation',
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
    'candidate_seed',
    'synthetic_case_id',
    'generate_candidates',
    'select_top_k',
    'build_augmented_manifest',
    'rankings_table',
    'FFD_LABELS',
    'ssim',
    'paired_ssim',
    'GaussianSummary',
    'fit_gaussian',
    'frechet_distance',
    'frechet_feature_distance',
    'train_feature_extractor',
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
