"""Evaluation and ablation reports as JSON (full) and CSV (table rows)."""

import logging
from pathlib import Path
from typing import List, Union

import pandas as pd

from src.config.constants import REPORT_CSV_COLUMNS
from src.models.schemas import AblationResult, EvalReport

logger = logging.getLogger(__name__)


class ReportStorage:
    """Writes a report to `<path>` (JSON) and a same-stem `.csv` next to it."""

    def __init__(self, path: Union[str, Path]):
        """Initialize report storage.

        Args:
            path: JSON report path; the CSV shares its stem
        """
        self.json_path = Path(path)
        if self.json_path.suffix.lower() == ".csv":
            self.json_path = self.json_path.with_suffix(".json")
        self.csv_path = self.json_path.with_suffix(".csv")

    def _write_csv(self, rows: List[dict]) -> None:
        df = pd.DataFrame(rows, columns=REPORT_CSV_COLUMNS)
        df.to_csv(self.csv_path, index=False)

    def write_report(self, report: EvalReport) -> Path:
        """Write one evaluation report.

        Args:
            report: EvalReport to persist

        Returns:
            Path to the JSON file
        """
        self.json_path.parent.mkdir(parents=True, exist_ok=True)
        self.json_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        self._write_csv([{
            "name": report.method,
            "image_auc_mean": report.image_auc,
            "image_auc_std": 0.0,
            "pixel_auc_mean": report.pixel_auc,
            "pixel_auc_std": 0.0,
            "iou": report.iou,
        }])
        logger.info(f"Wrote report to {self.json_path} and {self.csv_path}")
        return self.json_path

    def write_ablation(self, result: AblationResult) -> Path:
        """Write an ablation result, one CSV row per variant.

        Args:
            result: AblationResult to persist

        Returns:
            Path to the JSON file
        """
        self.json_path.parent.mkdir(parents=True, exist_ok=True)
        self.json_path.write_text(result.model_dump_json(indent=2) + "\n", encoding="utf-8")
        self._write_csv([
            {
                "name": summary.name,
                "image_auc_mean": summary.image_auc_mean,
                "image_auc_std": summary.image_auc_std,
                "pixel_auc_mean": summary.pixel_auc_mean,
                "pixel_auc_std": summary.pixel_auc_std,
                "iou": summary.iou_mean,
            }
            for summary in result.variants.values()
        ])
        logger.info(f"Wrote ablation report to {self.json_path} and {self.csv_path}")
        return self.json_path

    def read_report(self) -> EvalReport:
        return EvalReport.model_validate_json(self.json_path.read_text(encoding="utf-8"))

    def read_ablation(self) -> AblationResult:
        return AblationResult.model_validate_json(self.json_path.read_text(encoding="utf-8"))

    def read_table(self) -> pd.DataFrame:
        return pd.read_csv(self.csv_path)
