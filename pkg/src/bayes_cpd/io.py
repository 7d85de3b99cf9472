"""File formats: density CSV, raw-series CSV, and the JSON report shapes.

Float cells are written with ``repr``, the shortest round-tripping form,
so identical results serialize to identical bytes.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .cleaning import CleaningReport
from .density import DensityFunction, Grid
from .engine import CusumProfile, DetectionResult, DistributionalSequence
from .errors import BayesCpdError, CsvFormatError, StructuralError
from .ingestion import IngestionReport, RawSeries
from .simlab import ExperimentReport

_GRID_REL_TOL = 1e-9


def _fmt(x: float) -> str:
    return repr(float(x))


def _json_number(x: float):
    return None if np.isnan(x) else float(x)


# ---------------------------------------------------------------------------
# density CSV: row 1 = grid nodes, following rows = densities in time order
# ---------------------------------------------------------------------------

def write_density_csv(path, grid: Grid, densities: Iterable[DensityFunction]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_fmt(x) for x in grid.nodes)
        for density in densities:
            writer.writerow(_fmt(v) for v in density.values)


def _parse_float_row(row: list[str], line: int) -> np.ndarray:
    try:
        return np.array([float(cell) for cell in row], dtype=np.float64)
    except ValueError as exc:
        raise CsvFormatError(line, f"non-numeric cell ({exc})") from None


def read_density_csv(path) -> tuple[Grid, list[DensityFunction]]:
    """Parse a density CSV; structural problems raise with a line number."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [row for row in rows if row]
    if len(rows) < 2:
        raise CsvFormatError(1, "need a grid row plus at least one density row")
    nodes = _parse_float_row(rows[0], 1)
    if nodes.size < 16:
        raise CsvFormatError(1, f"grid needs >= 16 nodes, got {nodes.size}")
    grid = Grid(nodes.size)
    if not np.allclose(nodes, grid.nodes, rtol=0.0, atol=_GRID_REL_TOL):
        raise CsvFormatError(1, "grid row is not a uniform partition of [0, 1]")
    densities = []
    for offset, row in enumerate(rows[1:], start=2):
        values = _parse_float_row(row, offset)
        if values.size != grid.node_count:
            raise CsvFormatError(
                offset, f"expected {grid.node_count} values, got {values.size}"
            )
        try:
            densities.append(DensityFunction(grid, values))
        except BayesCpdError as exc:
            raise CsvFormatError(offset, f"invalid density row: {exc}") from None
    return grid, densities


def read_density_sequence(path) -> DistributionalSequence:
    _, densities = read_density_csv(path)
    return DistributionalSequence(tuple(densities))


# ---------------------------------------------------------------------------
# raw series CSV: header "timestamp,value"
# ---------------------------------------------------------------------------

def _parse_timestamp(cell: str, timestamp_format: str, line: int) -> float:
    try:
        if timestamp_format == "epoch":
            return float(cell)
        parsed = _dt.datetime.fromisoformat(cell)
        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=_dt.timezone.utc)
        return parsed.timestamp()
    except ValueError:
        raise CsvFormatError(line, f"bad {timestamp_format} timestamp {cell!r}") from None


def read_raw_series_csv(path, timestamp_format: str = "iso") -> RawSeries:
    if timestamp_format not in ("iso", "epoch"):
        raise StructuralError(f"timestamp_format must be iso|epoch, got {timestamp_format!r}")
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [row for row in rows if row]
    if not rows or [c.strip().lower() for c in rows[0]] != ["timestamp", "value"]:
        raise CsvFormatError(1, 'expected header "timestamp,value"')
    timestamps, values = [], []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise CsvFormatError(line, f"expected 2 cells, got {len(row)}")
        timestamps.append(_parse_timestamp(row[0], timestamp_format, line))
        try:
            values.append(float(row[1]))
        except ValueError:
            raise CsvFormatError(line, f"non-numeric value {row[1]!r}") from None
    try:
        return RawSeries(np.array(timestamps), np.array(values))
    except StructuralError as exc:
        raise CsvFormatError(2, str(exc)) from None


def write_raw_series_csv(path, series: RawSeries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "value"])
        for t, v in zip(series.timestamps, series.values):
            writer.writerow([_fmt(t), _fmt(v)])


# ---------------------------------------------------------------------------
# profile / replicate / boxplot CSVs
# ---------------------------------------------------------------------------

def write_profile_csv(path, profile: CusumProfile) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "norm_sq"])
        for k, value in enumerate(profile.norms_sq, start=1):
            writer.writerow([k, _fmt(value)])


def write_replicates_csv(path, report: ExperimentReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "k_hat", "abs_error", "p_value", "rejected", "method"])
        for rec in report.records:
            if rec.error is not None:
                continue
            writer.writerow([
                rec.replicate, rec.k_hat, rec.abs_error,
                _fmt(rec.p_value), str(rec.rejected).lower(), rec.method,
            ])


def write_boxplot_csv(path, report: ExperimentReport) -> None:
    """Quartiles, whisker ends, and fliers of abs_error per method."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "method", "median", "q1", "q3", "whisker_lo", "whisker_hi",
            "n_fliers", "fliers",
        ])
        for method in sorted(report.summaries):
            errs = np.array(
                [r.abs_error for r in report.records_for(method)], dtype=np.float64
            )
            if errs.size == 0:
                continue
            q1, med, q3 = np.percentile(errs, [25, 50, 75])
            iqr = q3 - q1
            inside = errs[(errs >= q1 - 1.5 * iqr) & (errs <= q3 + 1.5 * iqr)]
            lo, hi = float(inside.min()), float(inside.max())
            fliers = sorted(float(e) for e in errs[(errs < lo) | (errs > hi)])
            writer.writerow([
                method, _fmt(med), _fmt(q1), _fmt(q3), _fmt(lo), _fmt(hi),
                len(fliers), ";".join(_fmt(f) for f in fliers),
            ])


# ---------------------------------------------------------------------------
# JSON shapes
# ---------------------------------------------------------------------------

def detection_result_to_dict(result: DetectionResult,
                             increment_csv_path: str | None = None) -> dict:
    out = {
        "k_hat": result.k_hat,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "alpha": result.alpha,
        "reject_null": result.reject_null,
        "L": result.L,
        "eigenvalues": list(result.eigenvalues),
        "mc_samples": result.mc_samples,
        "seed": result.seed,
        "centering": result.centering,
        "degenerate": result.degenerate,
        "method": result.method,
    }
    if increment_csv_path is not None:
        out["increment_csv_path"] = increment_csv_path
    return out


def cleaning_report_to_dict(report: CleaningReport) -> dict:
    return {
        "removed_indices": list(report.removed_indices),
        "kept_indices": list(report.kept_indices),
        "detector": report.detector,
        "params": report.params,
    }


def ingestion_report_to_dict(report: IngestionReport) -> dict:
    return {
        "segments_total": report.segments_total,
        "segments_dropped": [list(pair) for pair in report.segments_dropped],
        "scalar_outliers_removed": report.scalar_outliers_removed,
        "clamped_values": report.clamped_values,
        "support": {"lower": report.support.lower, "upper": report.support.upper},
        "bandwidth_per_segment": list(report.bandwidth_per_segment),
    }


def experiment_report_to_dict(report: ExperimentReport) -> dict:
    cfg = report.config
    return {
        "config": {
            "generator": cfg.generator,
            "n": cfg.n,
            "k_star": cfg.k_star,
            "replicates": cfg.replicates,
            "contamination_count": cfg.contamination_count,
            "clean": cfg.clean,
            "detector": cfg.detector,
            "alpha": cfg.alpha,
            "mc_samples": cfg.mc_samples,
            "theta": cfg.theta,
            "seed": cfg.seed,
            "grid_nodes": cfg.grid_nodes,
            "bridge_nodes": cfg.bridge_nodes,
            "centering": cfg.centering,
            "compare_l2": cfg.compare_l2,
        },
        "summaries": {
            method: {
                "count": s.count,
                "median_abs_error": _json_number(s.median_abs_error),
                "q1_abs_error": _json_number(s.q1_abs_error),
                "q3_abs_error": _json_number(s.q3_abs_error),
                "rejection_rate": _json_number(s.rejection_rate),
            }
            for method, s in sorted(report.summaries.items())
        },
        "replicates": [
            {
                "replicate": r.replicate,
                "method": r.method,
                "k_hat": r.k_hat,
                "abs_error": r.abs_error,
                "p_value": None if np.isnan(r.p_value) else r.p_value,
                "rejected": r.rejected,
                "cleaned_indices": list(r.cleaned_indices),
                "contaminated_indices": list(r.contaminated_indices),
                "error": r.error,
            }
            for r in report.records
        ],
    }


def simulate_sidecar_to_dict(k_star: int, contaminated_indices, seed: int) -> dict:
    return {
        "k_star": k_star,
        "contaminated_indices": [int(i) for i in contaminated_indices],
        "seed": seed,
    }


def dump_json(obj: dict, path=None) -> str:
    """Serialize with a fixed layout; write to ``path`` when given."""
    text = json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
