"""
Run configuration and the command-line pipeline.
"""

import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from echosynth.config import OUTPUT_ROOT_ENV, RESOLVED_CONFIG_NAME, RUN_LOG_NAME, SUMMARY_NAME, TrainPhase
from echosynth.common.exceptions import ConfigError
from echosynth.cli.main import run
from echosynth.cli.run_config import load_run_config, parse_override
from echosynth.domain.models import EFTrainConfig


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv(OUTPUT_ROOT_ENV, raising=False)


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


def read_summary(directory):
    return json.loads((directory / SUMMARY_NAME).read_text(encoding="utf-8"))


# ==================== Configuration ====================

def test_defaults_and_overrides():
    config = load_run_config(overrides=["control.train.max_iters=500", "seed=3", "curate.mode=real_plus_synthetic"])
    assert config.seed == 3
    assert config.control.train.max_iters == 500
    assert config.control.train.phase == TrainPhase.CONDITIONAL
    assert config.control.train.warmup_iters == 10
    assert config.uncond.train.phase == TrainPhase.UNCONDITIONAL
    assert config.command_dir("sample").as_posix() == "runs/default/sample"


def test_precedence_file_then_environment_then_overrides(tmp_path):
    path = write_yaml(tmp_path / "run.yaml", {"output_root": "from_file", "run_name": "a"})
    assert load_run_config(path, environ={}).output_root == "from_file"
    assert load_run_config(path, environ={OUTPUT_ROOT_ENV: "from_env"}).output_root == "from_env"
    config = load_run_config(path, ["output_root=from_set"], environ={OUTPUT_ROOT_ENV: "from_env"})
    assert config.output_root == "from_set"


def test_override_values_keep_their_type():
    assert parse_override("a.b=3") == (("a", "b"), 3)
    assert parse_override("flag=true") == (("flag",), True)
    assert parse_override("name=x") == (("name",), "x")
    with pytest.raises(ConfigError):
        parse_override("no_equals_sign")
    with pytest.raises(ConfigError):
        parse_override("a..b=1")


@pytest.mark.parametrize("data", [
    {"unknown_key": 1},
    {"uncond": {"train": {"lr_max": 1e-5, "lr_min": 1e-3}}},
    {"control": {"train": {"phase": "unconditional"}}},
    {"schema_version": 99},
])
def test_invalid_files_are_config_errors(tmp_path, data):
    with pytest.raises(ConfigError):
        load_run_config(write_yaml(tmp_path / "run.yaml", data), environ={})


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.yaml")
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(listing)
    with pytest.raises(ConfigError):
        load_run_config(overrides=["seed.inner=1"])


def test_config_errors_exit_with_one(tmp_path):
    assert run(["phantom-gen", "--config", write_yaml(tmp_path / "run.yaml", {"bogus": True})]) == 1
    assert run(["phantom-gen", "--set", "broken"]) == 1


# ==================== Commands ====================

def phantom_args(root, *extra):
    return [
        "phantom-gen",
        "--set", f"output_root={root}",
        "--set", "phantom.n_train=2",
        "--set", "phantom.n_test=3",
        *extra,
    ]


def test_phantom_gen_run_directory(tmp_path):
    root = tmp_path / "runs"
    assert run(phantom_args(root)) == 0
    out = root / "default" / "phantom-gen"
    assert (out / RESOLVED_CONFIG_NAME).exists()
    assert (out / RUN_LOG_NAME).read_text(encoding="utf-8")
    summary = read_summary(out)
    assert summary["status"] == "ok"
    assert summary["counts"] == {"train": 2, "val": 0, "test": 3}
    resolved = yaml.safe_load((out / RESOLVED_CONFIG_NAME).read_text(encoding="utf-8"))
    assert resolved["phantom"]["n_test"] == 3
    manifest = (out / "manifest.json").read_bytes()

    assert run(phantom_args(root)) == 1
    assert run(phantom_args(root, "--force")) == 0
    assert (out / "manifest.json").read_bytes() == manifest


def test_missing_upstream_artifact_exits_with_two(tmp_path):
    assert run(["train-uncond", "--set", f"output_root={tmp_path}"]) == 2
    summary = read_summary(tmp_path / "default" / "train-uncond")
    assert summary["status"] == "failed"
    assert summary["exit_code"] == 2
    assert summary["error"]["type"] == "MissingArtifact"


def test_failed_run_can_be_retried_without_force(tmp_path):
    args = ["train-uncond", "--set", f"output_root={tmp_path}"]
    assert run(args) == 2
    assert run(args) == 2


def test_curate_scores_with_the_single_plane_model(tmp_path, monkeypatch):
    root = tmp_path / "runs"
    assert run(phantom_args(root)) == 0
    monkeypatch.setattr("echosynth.cli.commands._generator_from", lambda config, path: object())
    assert run(["curate", "--set", f"output_root={root}"]) == 2
    error = read_summary(root / "default" / "curate")["error"]
    assert error["type"] == "MissingArtifact"
    assert error["details"]["produced_by"] == "train-ef"
    assert error["details"]["path"] == str(root / "default" / "train-ef" / "a4c" / "ef_model.pt")


def test_evaluate_with_a_perfect_regressor(tmp_path, monkeypatch):
    root = tmp_path / "runs"
    assert run(phantom_args(root)) == 0
    manifest = json.loads((root / "default" / "phantom-gen" / "manifest.json").read_text(encoding="utf-8"))
    truth = {record["case_id"]: record["ef_true"] for record in manifest["records"]}

    monkeypatch.setattr("echosynth.cli.commands.load_ef_model", lambda path: None)
    monkeypatch.setattr("echosynth.cli.commands.load_ef_train_config", lambda path: EFTrainConfig())
    monkeypatch.setattr(
        "echosynth.services.ef_regression.predict_batch",
        lambda model, clips, batch_size=16: np.array([truth[clip.case_id] for clip in clips]),
    )
    code = run([
        "evaluate",
        "--set", f"output_root={root}",
        "--set", "evaluate.ef_models={perfect: unused.pt}",
        "--set", "evaluate.generative=false",
    ])
    assert code == 0
    out = root / "default" / "evaluate"
    summary = read_summary(out)
    assert summary["ef"]["perfect"]["r2"] == 1.0
    assert summary["ef"]["perfect"]["mae"] == 0.0
    assert (out / "ef_report_perfect.txt").exists()
    assert (out / "ef_metrics.csv").exists()


TINY_RUN = {
    "seed": 1,
    "phantom": {"n_train": 6, "n_test": 2},
    "unet": {
        "levels": 2,
        "base_channels": 4,
        "channel_multipliers": [1, 2],
        "time_embed_dim": 8,
        "attention_levels": [1],
        "attention_heads": 2,
        "norm_groups": 2,
    },
    "schedule": {"steps": 5},
    "uncond": {"train": {"max_iters": 2, "batch_size": 1}},
    "control": {"train": {"max_iters": 2, "batch_size": 1, "warmup_iters": 1}},
    "curate": {"n_candidates": 2, "top_k": 1},
    "ef": {"n_val": 2, "backbone": {"width": 4}, "train": {"epochs": 1, "batch_size": 2}},
    "evaluate": {"n_eval_cases": 2, "features": {"epochs": 1, "width": 4, "feature_dim": 4, "batch_size": 2}},
}


@pytest.mark.slow
def test_full_pipeline(tmp_path):
    config = write_yaml(tmp_path / "run.yaml", {**TINY_RUN, "output_root": str(tmp_path / "runs")})
    steps = [
        ["phantom-gen"],
        ["train-ef", "--set", "ef.train.dataset_mode=a4c"],
        ["train-uncond"],
        ["train-control"],
        ["sample", "--set", "sample.n_cases=1", "--set", "sample.per_case=1"],
        ["curate"],
        ["train-ef", "--set", "ef.train.dataset_mode=a4c_synth_a2c"],
        ["evaluate"],
    ]
    for step in steps:
        assert run([step[0], "--config", config, *step[1:]]) == 0, step[0]

    run_dir = tmp_path / "runs" / "default"
    curated = read_summary(run_dir / "curate")
    assert curated["counts"]["train"] == 6
    assert curated["ef_model"].endswith(str(Path("train-ef", "a4c", "ef_model.pt")))
    synth = read_summary(run_dir / "train-ef" / "a4c_synth_a2c")
    assert synth["n_val_items"] == 2
    assert synth["n_train_items"] == 8
    evaluation = read_summary(run_dir / "evaluate")
    assert set(evaluation["ef"]) == {"a4c", "a4c_synth_a2c"}
    assert set(evaluation["generative"]["control"]) == {"FFD-frame", "FFD-clip", "SSIM"}
