"""
Reporting
=========

Serialization of sweep results and evaluation tables:

- CSV report (`strategy,eta,accuracy,sensitivity,precision,f1,loss,flops,error`)
  with metrics as percentages to two decimals.
- JSON report holding the full-precision values, the provenance metadata,
  the baseline block and the per-row FLOPs reduction. The CSV can always be
  regenerated from it.
- Per-figure extracts (one series per strategy) ready for plotting.
- Terminal tables in the per-class + Total layout.
"""

import csv
import hashlib
import io
import logging
import pathlib
from typing import Any

import orjson
from tabulate import tabulate

from core.exceptions import ConfigError, DatasetError
from core.persistence import atomic_write_bytes
from data.models import CLASS_ORDER, MetricsRow, SweepReport, TrainLog
from services.flops import flops_reduction, flops_total

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY
CSV_COLUMNS = ["strategy", "eta", "accuracy", "sensitivity", "precision", "f1", "loss", "flops", "error"]
PERCENT_COLUMNS = ("accuracy", "sensitivity", "precision", "f1")
FIGURES = ("accuracy", "f1", "loss", "sensitivity", "flops")
TABLE_ROWS = (
    ("Accuracy", "accuracy"),
    ("Sensitivity", "sensitivity"),
    ("Specificity", "specificity"),
    ("Precision", "precision"),
    ("F1 Score", "f1"),
)


def dump_json(payload: Any) -> bytes:
    return orjson.dumps(payload, option=JSON_OPTIONS) + b"\n"


def config_hash(payload: Any) -> str:
    """Short sha256 of the canonical (sorted-key) JSON form of `payload`."""
    return hashlib.sha256(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS)).hexdigest()[:16]


def parse_sparsities(text: str) -> list[float]:
    """
    Parses an eta grid given as "start:stop:step" (stop inclusive) or as a
    comma-separated list. Values are rounded to 6 decimals.
    """
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ConfigError(f"sparsity range must be start:stop:step, got {text!r}")
            start, stop, step = parts
            if step <= 0 or stop < start:
                raise ConfigError(f"empty or infinite sparsity range {text!r}")
            count = int(round((stop - start) / step)) + 1
            values = [round(start + i * step, 6) for i in range(count)]
            values = [v for v in values if v <= stop + 1e-9]
        else:
            values = [round(float(p), 6) for p in text.split(",") if p.strip()]
    except ValueError as e:
        raise ConfigError(f"cannot parse sparsity grid {text!r}: {e}") from e
    if not values:
        raise ConfigError(f"sparsity grid {text!r} is empty")
    bad = [v for v in values if not 0.0 <= v <= 1.0]
    if bad:
        raise ConfigError(f"sparsities must lie in [0, 1], got {bad}")
    return values


def _pct(value: float | None) -> str:
    return "" if value is None else f"{value * 100:.2f}"


def render_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([
            row.strategy.value,
            f"{row.eta:g}",
            *(_pct(getattr(row, col)) for col in PERCENT_COLUMNS),
            "" if row.loss is None else f"{row.loss:.6f}",
            row.flops,
            row.error or "",
        ])
    return buf.getvalue()


def report_to_json(report: SweepReport) -> bytes:
    payload = report.model_dump(mode="json")
    for row in payload["rows"]:
        row["flops_reduction"] = flops_reduction(row["eta"])
    return dump_json(payload)


def report_from_json(data: bytes | str) -> SweepReport:
    try:
        return SweepReport.model_validate(orjson.loads(data))
    except (orjson.JSONDecodeError, ValueError) as e:
        raise DatasetError(f"not a sweep report: {e}", context="report") from e


def write_report(report: SweepReport, out: str | pathlib.Path) -> tuple[pathlib.Path, pathlib.Path]:
    """Writes `<out>.csv` and `<out>.json`; a .csv/.json suffix on `out` is dropped first."""
    base = pathlib.Path(out)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    csv_path = atomic_write_bytes(base.with_suffix(".csv"), render_csv(report).encode("utf-8"))
    json_path = atomic_write_bytes(base.with_suffix(".json"), report_to_json(report))
    logger.info(f"Report written to {csv_path} and {json_path}")
    return csv_path, json_path


def _baseline_value(report: SweepReport, metric: str) -> float | int | None:
    if metric == "flops":
        return flops_total(0.0)
    if not report.baseline:
        return None
    if metric == "loss":
        return report.baseline.get("loss")
    return report.baseline.get("overall", {}).get(metric)


def figure_series(report: SweepReport) -> dict[str, dict[str, Any]]:
    """Per metric: the baseline value and, per strategy, a list of [eta, value] pairs."""
    figures = {}
    for metric in FIGURES:
        series: dict[str, list[list[float]]] = {}
        for row in report.rows:
            value = getattr(row, metric)
            if value is None:
                continue
            series.setdefault(row.strategy.value, []).append([row.eta, value])
        figures[metric] = {"metric": metric, "baseline": _baseline_value(report, metric), "series": series}
    return figures


def write_figures(report: SweepReport, directory: str | pathlib.Path) -> list[pathlib.Path]:
    directory = pathlib.Path(directory)
    return [
        atomic_write_bytes(directory / f"{metric}.json", dump_json(extract))
        for metric, extract in figure_series(report).items()
    ]


def write_train_log(log: TrainLog, path: str | pathlib.Path) -> pathlib.Path:
    return atomic_write_bytes(path, dump_json(log.model_dump(mode="json")))


def metrics_table(per_class: list[MetricsRow], overall: MetricsRow) -> str:
    """Metrics down, classes (N S V F Q Total) across, as percentages."""
    headers = ["Metric", *(c.value for c in CLASS_ORDER), overall.label]
    rows = [
        [title, *(getattr(r, field) * 100 for r in [*per_class, overall])]
        for title, field in TABLE_ROWS
    ]
    return tabulate(rows, headers=headers, floatfmt=".2f")


def sweep_table(report: SweepReport) -> str:
    headers = ["Strategy", "eta", "Accuracy", "Sensitivity", "Precision", "F1", "Loss", "FLOPs", "Error"]
    rows = [
        [row.strategy.value, f"{row.eta:g}", *(_pct(getattr(row, c)) for c in PERCENT_COLUMNS),
         "" if row.loss is None else f"{row.loss:.4f}", row.flops, row.error or ""]
        for row in report.rows
    ]
    return tabulate(rows, headers=headers)
