"""
Sweep result CSVs.

``results.csv`` is the canonical artifact: one row per (t, model) with a
fixed header; cells that do not apply are empty. ``recovery.csv`` carries the
load-flow recovery rows. Numbers use ``.12g`` so identical sweeps write
identical bytes.
"""

from __future__ import annotations

from collections.abc import Iterable
import csv
import io
import math
from pathlib import Path

from src import config
from src.errors import ResultsFormatError
from src.solver.options import SolveStatus
from src.sweep.records import SweepRecord, sort_records

logger = config.LOGGER

RESULTS_HEADER = (
    "t",
    "model",
    "status",
    "objective",
    "gap_pct",
    "iters",
    "solve_time_s",
    "pct_binding_vmag",
    "pct_binding_flow",
    "recovered_objective",
    "recovered_gap_pct",
    "recovery_dispatch_distance",
)

RECOVERY_HEADER = (
    "t",
    "model",
    "recovery_status",
    "recovered_objective",
    "recovered_gap_pct",
    "recovery_dispatch_distance",
    "solve_time_s",
    "pct_binding_vmag",
    "pct_binding_flow",
)


def _cell(value: float | int | str | None) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".12g")
    return str(value)


def _results_row(rec: SweepRecord, record_timing: bool) -> dict[str, str]:
    return {
        "t": _cell(rec.t),
        "model": rec.model,
        "status": rec.status.value,
        "objective": _cell(rec.objective),
        "gap_pct": _cell(rec.gap_pct),
        "iters": _cell(rec.iterations),
        "solve_time_s": _cell(rec.solve_time_s if record_timing else None),
        "pct_binding_vmag": _cell(rec.pct_binding_vmag),
        "pct_binding_flow": _cell(rec.pct_binding_flow),
        "recovered_objective": _cell(rec.recovered_objective),
        "recovered_gap_pct": _cell(rec.recovered_gap_pct),
        "recovery_dispatch_distance": _cell(rec.recovery_dispatch_distance),
    }


def _recovery_row(rec: SweepRecord, record_timing: bool) -> dict[str, str]:
    assert rec.recovery_status is not None
    return {
        "t": _cell(rec.t),
        "model": rec.model,
        "recovery_status": rec.recovery_status.value,
        "recovered_objective": _cell(rec.recovered_objective),
        "recovered_gap_pct": _cell(rec.recovered_gap_pct),
        "recovery_dispatch_distance": _cell(rec.recovery_dispatch_distance),
        "solve_time_s": _cell(rec.recovery_time_s if record_timing else None),
        "pct_binding_vmag": _cell(rec.recovery_pct_binding_vmag),
        "pct_binding_flow": _cell(rec.recovery_pct_binding_flow),
    }


def results_csv(records: Iterable[SweepRecord], record_timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RESULTS_HEADER, lineterminator="\n")
    w.writeheader()
    for rec in sort_records(list(records)):
        w.writerow(_results_row(rec, record_timing))
    return buf.getvalue()


def recovery_csv(records: Iterable[SweepRecord], record_timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RECOVERY_HEADER, lineterminator="\n")
    w.writeheader()
    for rec in sort_records([r for r in records if r.recovery_status is not None]):
        w.writerow(_recovery_row(rec, record_timing))
    return buf.getvalue()


def write_results(records: Iterable[SweepRecord], path: Path, record_timing: bool = True) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(results_csv(records, record_timing), encoding="utf-8", newline="")
    logger.info("Wrote %s", path)
    return path


def write_recovery(records: Iterable[SweepRecord], path: Path, record_timing: bool = True) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(recovery_csv(records, record_timing), encoding="utf-8", newline="")
    logger.info("Wrote %s", path)
    return path


def _optional(value: str, column: str, line: int) -> float | None:
    if value == "":
        return None
    try:
        return float(value)
    except ValueError as exc:
        error = f"line {line}: column {column} is not numeric: {value!r}"
        logger.error(error)
        raise ResultsFormatError(error) from exc


def _status(value: str, line: int) -> SolveStatus:
    try:
        return SolveStatus(value)
    except ValueError as exc:
        error = f"line {line}: unknown status {value!r}"
        logger.error(error)
        raise ResultsFormatError(error) from exc


def parse_results(text: str) -> list[SweepRecord]:
    """Inverse of ``results_csv``; rows come back in (t, model) order."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != RESULTS_HEADER:
        error = f"unexpected results header {reader.fieldnames}; expected {','.join(RESULTS_HEADER)}"
        logger.error(error)
        raise ResultsFormatError(error)
    records: list[SweepRecord] = []
    for line, row in enumerate(reader, start=2):
        t = _optional(row["t"], "t", line)
        if t is None:
            error = f"line {line}: missing t"
            logger.error(error)
            raise ResultsFormatError(error)
        iters = _optional(row["iters"], "iters", line)
        records.append(
            SweepRecord(
                t=t,
                model=row["model"],
                status=_status(row["status"], line),
                objective=_optional(row["objective"], "objective", line),
                gap_pct=_optional(row["gap_pct"], "gap_pct", line),
                iterations=int(iters) if iters is not None else 0,
                solve_time_s=_optional(row["solve_time_s"], "solve_time_s", line),
                pct_binding_vmag=_optional(row["pct_binding_vmag"], "pct_binding_vmag", line),
                pct_binding_flow=_optional(row["pct_binding_flow"], "pct_binding_flow", line),
                recovered_objective=_optional(row["recovered_objective"], "recovered_objective", line),
                recovered_gap_pct=_optional(row["recovered_gap_pct"], "recovered_gap_pct", line),
                recovery_dispatch_distance=_optional(
                    row["recovery_dispatch_distance"], "recovery_dispatch_distance", line
                ),
            )
        )
    return sort_records(records)


def read_results(path: Path) -> list[SweepRecord]:
    if not path.is_file():
        error = f"results file not found: {path}"
        logger.error(error)
        raise FileNotFoundError(error)
    return parse_results(path.read_text(encoding="utf-8"))
