"""Result records and their files: results.csv, results.json, plotdata/*.csv and the records.jsonl ledger."""

import csv
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, computed_field

from spdelab.core.base import MCEstimate

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("experiment", "metric", "value", "std_error", "target", "tolerance", "comparison", "passed")

Comparison = Literal["abs", "max", "min", "info"]


class Metric(BaseModel):
    """One row of results.csv. `passed` follows from value, target, tolerance and comparison alone.

    abs: |value - target| <= tolerance;  max: value <= target + tolerance;
    min: value >= target - tolerance;   info: reported, never checked.
    """

    name: str
    value: float
    std_error: Optional[float] = None
    target: Optional[float] = None
    tolerance: Optional[float] = None
    comparison: Comparison = "info"

    @property
    def checked(self) -> bool:
        return self.comparison != "info"

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> Optional[bool]:
        if not self.checked:
            return None
        target = 0.0 if self.target is None else self.target
        tolerance = 0.0 if self.tolerance is None else self.tolerance
        if not math.isfinite(self.value):
            return False
        if self.comparison == "abs":
            return abs(self.value - target) <= tolerance
        if self.comparison == "max":
            return self.value <= target + tolerance
        return self.value >= target - tolerance

    def row(self, experiment: str) -> list[str]:
        passed = self.passed
        return [
            experiment,
            self.name,
            _number(self.value),
            _number(self.std_error),
            _number(self.target),
            _number(self.tolerance),
            self.comparison,
            "" if passed is None else str(passed).lower(),
        ]


class Series(BaseModel):
    name: str
    x: list[float]
    y: list[float]


class ResultRecord(BaseModel):
    experiment: str
    kind: str
    config_hash: str
    inputs_hash: str
    seed: int
    threads: int
    wall_clock: float = 0.0
    metrics: list[Metric] = Field(default_factory=list)
    estimates: list[dict[str, Any]] = Field(default_factory=list)
    series: list[Series] = Field(default_factory=list)
    details: dict[str, Any] = Field(default_factory=dict)
    warnings: list[str] = Field(default_factory=list)
    config: dict[str, Any] = Field(default_factory=dict)

    # callbacks handed to AbstractExperiment.setup

    def add_metric(
        self,
        name: str,
        value: float,
        std_error: Optional[float] = None,
        target: Optional[float] = None,
        tolerance: Optional[float] = None,
        comparison: str = "info",
    ) -> None:
        self.metrics.append(
            Metric(name=name, value=float(value), std_error=std_error, target=target, tolerance=tolerance, comparison=comparison)
        )

    def add_estimate(
        self,
        name: str,
        estimate: MCEstimate,
        target: Optional[float] = None,
        tolerance: Optional[float] = None,
        comparison: str = "info",
    ) -> None:
        self.add_metric(name, estimate.value, estimate.std_error, target, tolerance, comparison)
        self.estimates.append(_plain({"name": name, **estimate.to_record(self.inputs_hash), "t": estimate.t, "metadata": estimate.metadata}))

    def add_series(self, name: str, x: Sequence[float], y: Sequence[float]) -> None:
        self.series.append(Series(name=name, x=[float(v) for v in x], y=[float(v) for v in y]))

    def add_detail(self, key: str, value: Any) -> None:
        self.details[key] = _plain(value)

    @property
    def failures(self) -> list[Metric]:
        return [m for m in self.metrics if m.passed is False]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return not self.failures


def inputs_hash(config: dict[str, Any]) -> str:
    """Git-style blob hash (SHA-1 over "blob <size>\\0" + content) of the canonical config."""
    content = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(content) + content).hexdigest()


def _number(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _plain(value: Any) -> Any:
    """JSON-safe copy: arrays become lists, non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_csv(record: ResultRecord, path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(CSV_COLUMNS)
        for metric in record.metrics:
            writer.writerow(metric.row(record.experiment))
    return path


def write_plotdata(record: ResultRecord, directory: Path) -> list[Path]:
    """One two-column CSV (log10 x, log10 y) per series; nonpositive points are skipped."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for series in record.series:
        path = directory / f"{series.name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(["log10_x", "log10_y"])
            for x, y in zip(series.x, series.y):
                if x > 0.0 and y > 0.0:
                    writer.writerow([repr(math.log10(x)), repr(math.log10(y))])
        paths.append(path)
    return paths


def write_record(record: ResultRecord, directory: Path, formats: Sequence[str] = ("csv", "json", "plotdata")) -> dict[str, Any]:
    """Write the record files into `directory` and append one summary line to the parent ledger."""
    directory.mkdir(parents=True, exist_ok=True)
    written: dict[str, Any] = {}
    if "csv" in formats:
        written["csv"] = write_csv(record, directory / "results.csv")
    if "json" in formats:
        path = directory / "results.json"
        path.write_text(json.dumps(_plain(record.model_dump(mode="python")), indent=2, sort_keys=True) + "\n")
        written["json"] = path
    if "plotdata" in formats and record.series:
        written["plotdata"] = write_plotdata(record, directory / "plotdata")

    ledger = directory.parent / "records.jsonl"
    summary = {
        "experiment": record.experiment,
        "kind": record.kind,
        "config_hash": record.config_hash,
        "seed": record.seed,
        "passed": record.passed,
        "failures": [m.name for m in record.failures],
        "wall_clock": record.wall_clock,
    }
    with open(ledger, "a") as fh:
        fh.write(json.dumps(summary, sort_keys=True) + "\n")
    logger.info(f"Wrote {sorted(written)} for {record.experiment} to {directory}", extra={"handler": "write_record", "op": record.kind})
    return written
