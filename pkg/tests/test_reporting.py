"""
Sample export and report tables.
"""

import numpy as np
import pandas as pd
import pytest
from PIL import Image

from echosynth.common.exceptions import DataEmpty
from echosynth.domain.models import CasePrediction, EFReport
from echosynth.services.reporting import (
    ef_report_table,
    ef_report_text,
    export_gif,
    export_grid,
    format_table,
    summarize_reports,
    write_table,
)

from .conftest import random_clip


def report(r2=0.5, mae=2.0, rmse=3.0):
    predictions = (
        CasePrediction(case_id="a", ef_true=40.0, ef_pred=43.0),
        CasePrediction(case_id="b", ef_true=60.0, ef_pred=59.0),
    )
    return EFReport(r2=r2, mae=mae, rmse=rmse, predictions=predictions)


def test_grid_layout(tmp_path):
    path = export_grid([random_clip(0), random_clip(1)], tmp_path / "out" / "grid.png")
    with Image.open(path) as image:
        assert image.mode == "L"
        assert image.size == (16 * 66 + 2, 2 * 66 + 2)
    with pytest.raises(DataEmpty):
        export_grid([], tmp_path / "empty.png")


def test_gif_has_every_frame(tmp_path):
    path = export_gif(random_clip(0), tmp_path / "clip.gif")
    with Image.open(path) as image:
        assert image.n_frames == 16
        assert image.size == (64, 64)


def test_ef_report_table_and_text():
    table = ef_report_table(report())
    assert list(table.columns) == ["case_id", "ef_true", "ef_pred", "abs_error"]
    assert table["abs_error"].tolist() == [3.0, 1.0]
    text = ef_report_text(report(), title="Test")
    assert text.startswith("Test\n====\n")
    assert "MAE" in text and "cases" in text


def test_summary_and_csv(tmp_path):
    summary = summarize_reports({"a4c": report(0.5), "a4c_a2c": report(0.8)})
    assert summary.index.name == "configuration"
    assert summary.loc["a4c_a2c", "R2"] == 0.8
    path = write_table(summary, tmp_path / "summary.csv", index=True)
    restored = pd.read_csv(path, index_col=0)
    assert np.allclose(restored["R2"].to_numpy(), [0.5, 0.8])
    assert "a4c_a2c" in format_table(summary, title="EF")
