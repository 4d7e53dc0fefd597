"""
Experiment reports: per-seed metric rows, aggregates over seeds and acceptance checks.

Reports hold no timestamps or host details, so rerunning an experiment with the same
configuration and seeds rewrites byte-identical files.
"""
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ..core.logging_config import LogCategory, get_logger
from ..error_handling import ConfigMismatchError, MissingInputError, RejectedInputError

logger = get_logger(__name__, LogCategory.BENCH)

FLOAT_DIGITS = 10


class CheckResult(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    passed: bool
    detail: str = ""


class ExperimentReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: str
    config_hash: str
    config_snapshot: str = ""
    seeds: List[int] = Field(default_factory=list)
    rows: List[Dict[str, Any]] = Field(default_factory=list)
    aggregate: Dict[str, Dict[str, Optional[float]]] = Field(default_factory=dict)
    checks: List[CheckResult] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def add_check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckResult(name=name, passed=bool(passed), detail=detail))

    def to_json(self) -> str:
        payload = self.model_dump(mode="json")
        payload["passed"] = self.passed
        return json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"


def _clean(value):
    """Round floats and map non-finite values to None so JSON output is stable and valid."""
    if isinstance(value, float):
        return round(value, FLOAT_DIGITS) if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def summarize(frame: pd.DataFrame, columns: Sequence[str], by: Optional[str] = None) -> Dict[str, Dict[str, Optional[float]]]:
    """Mean and standard deviation over seeds for each numeric column (optionally per group)."""
    out: Dict[str, Dict[str, Optional[float]]] = {}
    groups = [(None, frame)] if by is None else list(frame.groupby(by, sort=True))
    for key, part in groups:
        for column in columns:
            values = pd.to_numeric(part[column], errors="coerce").dropna()
            name = column if key is None else f"{key}.{column}"
            out[name] = {
                "mean": float(values.mean()) if len(values) else None,
                "std": float(values.std(ddof=0)) if len(values) else None,
            }
    return out


def write_report(report: ExperimentReport, reports_dir: Union[str, Path],
                 csv_name: Optional[str] = None, table: Optional[pd.DataFrame] = None) -> Path:
    """Write ``<experiment>.json`` and, when given, the companion CSV table."""
    reports_dir = Path(reports_dir)
    reports_dir.mkdir(parents=True, exist_ok=True)
    path = reports_dir / f"{report.experiment}.json"
    path.write_text(report.to_json(), encoding="utf-8")
    if csv_name is not None:
        frame = table if table is not None else report.frame()
        frame.to_csv(reports_dir / csv_name, index=False, float_format="%.10g")
    logger.persistence_info(
        f"wrote report {path.name} ({'pass' if report.passed else 'fail'})", operation="write_report"
    )
    return path


def load_report(path: Union[str, Path]) -> ExperimentReport:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(str(path), "run-all")
    payload = json.loads(path.read_text(encoding="utf-8"))
    payload.pop("passed", None)
    return ExperimentReport.model_validate(payload)


def aggregate_reports(reports: Sequence[ExperimentReport]) -> pd.DataFrame:
    """
    Combine reports of the same experiment (e.g. seeds run as separate processes) into one
    table. Reports produced under different configurations are refused.
    """
    if not reports:
        raise RejectedInputError("nothing to aggregate")
    hashes = sorted({r.config_hash for r in reports})
    if len(hashes) > 1:
        raise ConfigMismatchError(
            "reports were produced under different configurations",
            details={"config_hashes": hashes},
        )
    frames = []
    for report in reports:
        frame = report.frame()
        frame.insert(0, "experiment", report.experiment)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)
