"""
EF regressors: metrics, backbones, dataset compositions and training.
"""

import math

import numpy as np
import pytest
import torch

from echosynth.config import EFBackboneKind, EFDatasetMode, Provenance, Split, View
from echosynth.common.exceptions import (
    DataEmpty,
    DegenerateTargets,
    InvalidConfigError,
    LengthMismatch,
    MissingArtifact,
    ShapeMismatch,
    TooFewSamples,
)
from echosynth.domain.models import CaseRecord, EFBackboneConfig, EFTrainConfig
from echosynth.factories.backbone_factory import BackboneFactory
from echosynth.models.ef_backbones import Small3DCNN, parameter_count
from echosynth.services.ef_regression import (
    allocate_validation,
    clamp_ef,
    compute_metrics,
    ef_grid,
    ef_training_items,
    evaluate_cases,
    load_ef_model,
    load_ef_train_config,
    predict_batch,
    predict_biplane,
    predict_ef,
    save_ef_model,
    train_ef,
)

from .conftest import random_case, random_clip

SMALL = EFBackboneConfig(width=4)


def test_metrics_by_hand():
    targets = [10.0, 20.0, 30.0, 40.0, 50.0]
    preds = [12.0, 18.0, 33.0, 40.0, 47.0]
    report = compute_metrics(preds, targets, ["a", "b", "c", "d", "e"])
    assert report.r2 == pytest.approx(1.0 - 26.0 / 1000.0, abs=1e-12)
    assert report.mae == pytest.approx(2.0, abs=1e-12)
    assert report.rmse == pytest.approx(math.sqrt(26.0 / 5.0), abs=1e-12)
    assert [p.case_id for p in report.predictions] == ["a", "b", "c", "d", "e"]


def test_perfect_predictions():
    report = compute_metrics([30.0, 60.0], [30.0, 60.0])
    assert report.r2 == 1.0 and report.mae == 0.0 and report.rmse == 0.0


def test_metric_errors():
    with pytest.raises(LengthMismatch):
        compute_metrics([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(TooFewSamples):
        compute_metrics([1.0], [1.0])
    with pytest.raises(DegenerateTargets):
        compute_metrics([1.0, 2.0], [5.0, 5.0])


def test_rmse_never_below_mae():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        n = int(rng.integers(2, 12))
        targets = rng.uniform(10, 90, n)
        if np.ptp(targets) == 0:
            continue
        report = compute_metrics(rng.uniform(0, 100, n), targets)
        assert report.rmse >= report.mae - 1e-12


def test_clamping_is_report_time_only():
    assert clamp_ef(np.array([-5.0, 50.0, 120.0])).tolist() == [0.0, 50.0, 100.0]


@pytest.mark.parametrize("kind", list(EFBackboneKind))
def test_backbones_predict_one_scalar_per_clip(kind):
    model = BackboneFactory.create(EFBackboneConfig(backbone=kind, width=4), seed=0)
    clips = [random_clip(i) for i in range(3)]
    predictions = predict_batch(model, clips, batch_size=2)
    assert predictions.shape == (3,)
    assert np.isfinite(predictions).all()
    assert predict_ef(model, clips[0]) == pytest.approx(predictions[0], rel=1e-5)


def test_small_cnn_is_desk_scale():
    assert parameter_count(Small3DCNN(EFBackboneConfig())) == 208_481


def test_factory_registry():
    assert BackboneFactory.available() == sorted(k.value for k in EFBackboneKind)
    with pytest.raises(InvalidConfigError):
        BackboneFactory.register_backbone("bogus", dict)
    with pytest.raises(InvalidConfigError):
        BackboneFactory.create(EFBackboneConfig.model_construct(backbone="bogus", input_shape=(16, 1, 64, 64), width=4))


def test_factory_is_seeded():
    a = BackboneFactory.create(SMALL, seed=1).state_dict()
    b = BackboneFactory.create(SMALL, seed=1).state_dict()
    assert all(torch.equal(a[k], b[k]) for k in a)


def test_input_shape_is_checked():
    model = BackboneFactory.create(EFBackboneConfig(width=4, input_shape=(8, 1, 64, 64)))
    with pytest.raises(ShapeMismatch):
        predict_ef(model, random_clip(0))


def test_biplane_is_the_mean_of_both_views():
    model = BackboneFactory.create(SMALL)
    a4c, a2c = random_clip(0, View.A4C, "x"), random_clip(1, View.A2C, "x")
    expected = (predict_ef(model, a4c) + predict_ef(model, a2c)) / 2.0
    assert predict_biplane(model, a4c, a2c) == pytest.approx(expected)


def _synthetic_record(real: CaseRecord, seed: int) -> CaseRecord:
    return CaseRecord(
        a4c=real.a4c,
        a2c=random_clip(seed, View.A2C, real.case_id),
        ef_true=real.ef_true,
        split=Split.TRAIN,
        provenance=Provenance.SYNTHETIC,
    )


def test_dataset_compositions():
    real = [random_case(0, "r0", 40.0), random_case(1, "r1", 60.0)]
    synthetic = [_synthetic_record(real[0], 50), _synthetic_record(real[0], 51)]
    cases = real + synthetic
    counts = {mode: len(ef_training_items(cases, mode)) for mode in EFDatasetMode}
    assert counts == {
        EFDatasetMode.A4C: 2,
        EFDatasetMode.A4C_A2C: 4,
        EFDatasetMode.A4C_SYNTH_A2C: 4,
        EFDatasetMode.A4C_A2C_SYNTH_A2C: 6,
    }
    # synthetic-only studies still contribute their real A4C once
    only_synthetic = ef_training_items(synthetic, EFDatasetMode.A4C_SYNTH_A2C)
    assert len(only_synthetic) == 3
    assert sum(clip.view == View.A4C for clip, _ in only_synthetic) == 1


def test_validation_allocation_keeps_studies_whole():
    real = [random_case(i, f"r{i}", 20.0 + 5 * i) for i in range(6)]
    synthetic = [_synthetic_record(case, 100 + i) for i, case in enumerate(real)]
    train, val = allocate_validation(real + synthetic, n_val=2, seed=3)
    val_ids = {case.case_id for case in val}
    assert len(val_ids) == 2 and len(val) == 2
    assert all(case.provenance != Provenance.SYNTHETIC for case in val)
    assert not val_ids & {case.case_id for case in train}
    assert len(train) == 8
    assert [c.case_id for c in allocate_validation(real, n_val=2, seed=3)[1]] == [c.case_id for c in val]


def test_training_keeps_best_epoch(tmp_path):
    cases = [random_case(i, f"c{i}", 20.0 + 10 * i) for i in range(5)]
    train_items = ef_training_items(cases[:3], EFDatasetMode.A4C_A2C)
    val_items = ef_training_items(cases[3:], EFDatasetMode.A4C)
    config = EFTrainConfig(epochs=3, batch_size=2, lr=1e-3, seed=0, dataset_mode=EFDatasetMode.A4C_A2C)
    model = BackboneFactory.create(SMALL, seed=0)

    result = train_ef(model, train_items, val_items, config)
    assert len(result.val_curve) == 3 and len(result.train_curve) == 3
    assert result.best_epoch == int(np.argmin(result.val_curve))
    mse = float(np.mean((predict_batch(model, [c for c, _ in val_items]) - [ef for _, ef in val_items]) ** 2))
    assert mse == pytest.approx(result.best_val_mse, rel=1e-5)

    path = save_ef_model(result, tmp_path / "ef_model.pt")
    restored = load_ef_model(path)
    assert np.allclose(predict_batch(restored, [c for c, _ in val_items]), predict_batch(model, [c for c, _ in val_items]))
    assert load_ef_train_config(path) == config


def test_training_needs_both_splits():
    items = [(random_clip(0), 40.0)]
    model = BackboneFactory.create(SMALL)
    with pytest.raises(DataEmpty):
        train_ef(model, [], items, EFTrainConfig(epochs=1))
    with pytest.raises(DataEmpty):
        train_ef(model, items, [], EFTrainConfig(epochs=1))


def test_missing_model_archive(tmp_path):
    with pytest.raises(MissingArtifact):
        load_ef_model(tmp_path / "absent.pt")
    with pytest.raises(MissingArtifact):
        load_ef_train_config(tmp_path / "absent.pt")


def test_grid_covers_every_combination():
    grid = ef_grid(EFTrainConfig(seed=4))
    assert len(grid) == 27
    assert len({(c.batch_size, c.epochs, c.lr) for c in grid}) == 27
    assert all(c.seed == 4 for c in grid)


def test_report_evaluation(monkeypatch):
    cases = [random_case(i, f"t{i}", 30.0 + 10 * i, split=Split.TEST) for i in range(3)]
    truth = {id(case.a4c): case.ef_true for case in cases}
    truth.update({id(case.a2c): case.ef_true + 2.0 for case in cases})
    monkeypatch.setattr(
        "echosynth.services.ef_regression.predict_batch",
        lambda model, clips, batch_size=16: np.array([truth[id(clip)] for clip in clips]),
    )
    single = evaluate_cases(None, cases)
    assert single.r2 == 1.0 and single.mae == 0.0
    biplane = evaluate_cases(None, cases, biplane=True)
    assert biplane.mae == pytest.approx(1.0)

    without_a2c = [random_case(9, "t9", 50.0, split=Split.TEST, with_a2c=False)] + cases
    with pytest.raises(DataEmpty):
        evaluate_cases(None, without_a2c, biplane=True)
