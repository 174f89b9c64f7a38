"""Tests for JSON/CSV report persistence."""

import pytest

from src.config.constants import REPORT_CSV_COLUMNS
from src.models.enums import Verdict
from src.models.schemas import AblationResult, EvalReport, SampleScore, VariantSummary
from src.storage.report_store import ReportStorage


def make_report(image_auc: float = 0.9, seed: int = 42) -> EvalReport:
    return EvalReport(
        method="CLAD",
        category="stripes",
        image_auc=image_auc,
        pixel_auc=0.8,
        iou=0.3,
        iou_cutoff=0.5,
        accuracy=0.75,
        pixel_precision=0.4,
        pixel_recall=0.6,
        threshold=0.42,
        samples=[
            SampleScore(id="test/normal/000", score=0.9, squared_distance=0.1, label=Verdict.NORMAL,
                        verdict=Verdict.NORMAL),
        ],
        config_hash="abc",
        seed=seed,
    )


def make_summary(name: str) -> VariantSummary:
    return VariantSummary(
        name=name,
        reports=[make_report(0.9, 0), make_report(0.8, 1)],
        image_auc_mean=0.85,
        image_auc_std=0.07,
        pixel_auc_mean=0.8,
        pixel_auc_std=0.0,
        iou_mean=0.3,
        iou_std=0.0,
    )


def test_report_json_and_csv(tmp_path):
    storage = ReportStorage(tmp_path / "out" / "report.json")
    path = storage.write_report(make_report())
    assert path == tmp_path / "out" / "report.json"
    assert storage.read_report() == make_report()
    table = storage.read_table()
    assert list(table.columns) == REPORT_CSV_COLUMNS
    assert table.loc[0, "name"] == "CLAD"
    assert table.loc[0, "image_auc_mean"] == pytest.approx(0.9)
    assert table.loc[0, "image_auc_std"] == 0.0


def test_csv_path_normalized_to_json(tmp_path):
    storage = ReportStorage(tmp_path / "report.csv")
    assert storage.json_path.name == "report.json"
    assert storage.csv_path.name == "report.csv"


def test_ablation_rows_per_variant(tmp_path):
    names = ["full", "no_contrastive", "no_finetune", "shallow_encoder"]
    result = AblationResult(seeds=[0, 1], variants={name: make_summary(name) for name in names})
    storage = ReportStorage(tmp_path / "ablation.json")
    storage.write_ablation(result)
    assert storage.read_ablation() == result
    table = storage.read_table()
    assert list(table["name"]) == names
    assert table["image_auc_std"].tolist() == pytest.approx([0.07] * 4)


def test_ablation_needs_all_variants():
    with pytest.raises(ValueError):
        AblationResult(seeds=[0, 1], variants={"full": make_summary("full")})
