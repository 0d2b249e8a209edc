"""Canonical report, outcome, snapshot and comparison serialization.

JSON documents are emitted with keys in a fixed documented order and every
float formatted to 9 significant digits (%.9g), so identical inputs always
produce identical bytes and a parse/re-serialize cycle is the identity.
CSV output uses the same numeric formatting, a stable column order and LF
line endings.

Schemas:

    Report (JSON): mean_compute_utilization, utilization_stddev,
        total_power_w, node_count, created_node_count, request_count,
        unallocated_count, per_resource_mean_utilization {compute, memory,
        storage}, deadline_misses, energy_wh (null when not a timeline run)
    Report (CSV, one row): same fields flattened, per-resource means as
        mean_memory_utilization / mean_storage_utilization, empty cells
        for nulls; optional leading algorithm column
    Outcome document (JSON): algorithm, outcome {allocation (sorted by
        request id), unallocated, created_node_ids, trace}, report
    Snapshots (CSV): time_s, node_id, compute_util, memory_util,
        storage_util, power_w
    Comparison (CSV/JSON rows): algorithm, mean_util, util_stddev,
        total_power_w, node_count, unallocated_count
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import IO, Dict, List, Optional, Sequence, Tuple, Union

from .metrics import Report
from .model import ValidationError
from .scheduling import AllocationOutcome, DecisionRecord
from .simulator import SnapshotRow

Sink = Union[str, Path, IO[str]]

REPORT_CSV_COLUMNS = (
    "mean_compute_utilization",
    "utilization_stddev",
    "total_power_w",
    "node_count",
    "created_node_count",
    "request_count",
    "unallocated_count",
    "mean_memory_utilization",
    "mean_storage_utilization",
    "deadline_misses",
    "energy_wh",
)

SNAPSHOT_CSV_COLUMNS = ("time_s", "node_id", "compute_util", "memory_util", "storage_util", "power_w")

COMPARISON_COLUMNS = (
    "algorithm",
    "mean_util",
    "util_stddev",
    "total_power_w",
    "node_count",
    "unallocated_count",
)


def format_float(value: float) -> str:
    """Canonical decimal form: 9 significant digits, -0 normalized."""

    if not math.isfinite(value):
        raise ValidationError(f"cannot serialize non-finite float {value!r}")
    text = "%.9g" % value
    return "0" if text == "-0" else text


def canonical_json(value: object) -> str:
    """Serialize a JSON tree deterministically.

    Dict keys keep insertion order (callers build them in schema order);
    floats go through format_float. Round-trip stable: parsing the output
    and re-serializing reproduces the same bytes.
    """

    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, dict):
        parts = (f"{json.dumps(str(k), ensure_ascii=False)}:{canonical_json(v)}" for k, v in value.items())
        return "{" + ",".join(parts) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(canonical_json(item) for item in value) + "]"
    raise ValidationError(f"cannot serialize {type(value).__name__} canonically")


def report_to_dict(report: Report) -> Dict[str, object]:
    """Report as a JSON-ready dict in canonical key order."""

    per = report.per_resource_mean_utilization
    return {
        "mean_compute_utilization": float(report.mean_compute_utilization),
        "utilization_stddev": float(report.utilization_stddev),
        "total_power_w": float(report.total_power_w),
        "node_count": report.node_count,
        "created_node_count": report.created_node_count,
        "request_count": report.request_count,
        "unallocated_count": report.unallocated_count,
        "per_resource_mean_utilization": {
            "compute": float(per.compute),
            "memory": float(per.memory),
            "storage": float(per.storage),
        },
        "deadline_misses": report.deadline_misses,
        "energy_wh": float(report.energy_wh) if report.energy_wh is not None else None,
    }


def _decision_to_dict(record: DecisionRecord) -> Dict[str, object]:
    demand = record.demand
    entry: Dict[str, object] = {
        "request_id": record.request_id,
        "demand": {
            "compute": float(demand.compute),
            "memory_gib": float(demand.memory_gib),
            "storage_gib": float(demand.storage_gib),
        },
        "scanned": list(record.scanned),
        "chosen_node_id": record.chosen_node_id,
        "pct": None,
        "created_node": record.created_node,
        "reason": record.reason,
    }
    if record.pct is not None:
        entry["pct"] = {
            "compute": float(record.pct.compute),
            "memory": float(record.pct.memory),
            "storage": float(record.pct.storage),
        }
    if record.power_estimates:
        entry["power_estimates"] = [[node_id, float(watts)] for node_id, watts in record.power_estimates]
    return entry


def outcome_to_dict(outcome: AllocationOutcome) -> Dict[str, object]:
    """AllocationOutcome as a JSON-ready dict; allocation sorted by request id."""

    return {
        "allocation": {rid: outcome.allocation[rid] for rid in sorted(outcome.allocation)},
        "unallocated": list(outcome.unallocated),
        "created_node_ids": list(outcome.created_node_ids),
        "trace": [_decision_to_dict(record) for record in outcome.trace],
    }


def _open_sink(sink: Sink) -> Tuple[IO[str], bool]:
    if isinstance(sink, (str, Path)):
        return open(sink, "w", encoding="utf-8", newline=""), True
    return sink, False


def _write_text(text: str, sink: Sink) -> None:
    stream, owned = _open_sink(sink)
    try:
        stream.write(text)
    finally:
        if owned:
            stream.close()


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(value) for value in row])
    return buffer.getvalue()


def report_csv_row(report: Report) -> List[object]:
    per = report.per_resource_mean_utilization
    return [
        float(report.mean_compute_utilization),
        float(report.utilization_stddev),
        float(report.total_power_w),
        report.node_count,
        report.created_node_count,
        report.request_count,
        report.unallocated_count,
        float(per.memory),
        float(per.storage),
        report.deadline_misses,
        float(report.energy_wh) if report.energy_wh is not None else None,
    ]


def write_report(
    payload: Union[Report, Sequence[SnapshotRow]],
    fmt: str,
    sink: Sink,
    *,
    algorithm: Optional[str] = None,
) -> None:
    """Write a Report or a snapshot series canonically.

    fmt is "json" or "csv". A Report becomes one canonical JSON document
    or a one-row summary CSV (with a leading algorithm column when given);
    a snapshot series becomes a CSV table or a JSON list of row objects.
    An empty snapshot series yields a header-only CSV.
    """

    if fmt not in ("json", "csv"):
        raise ValidationError(f"format must be json or csv, got {fmt!r}")
    if isinstance(payload, Report):
        if fmt == "json":
            doc: Dict[str, object] = {}
            if algorithm is not None:
                doc["algorithm"] = algorithm
            doc.update(report_to_dict(payload))
            _write_text(canonical_json(doc) + "\n", sink)
        else:
            header = (("algorithm",) if algorithm is not None else ()) + REPORT_CSV_COLUMNS
            row = ([algorithm] if algorithm is not None else []) + report_csv_row(payload)
            _write_text(_csv_text(header, [row]), sink)
        return

    rows = list(payload)
    if fmt == "csv":
        _write_text(
            _csv_text(
                SNAPSHOT_CSV_COLUMNS,
                [
                    [r.time_s, r.node_id, r.compute_util, r.memory_util, r.storage_util, r.power_w]
                    for r in rows
                ],
            ),
            sink,
        )
    else:
        docs = [
            {
                "time_s": float(r.time_s),
                "node_id": r.node_id,
                "compute_util": float(r.compute_util),
                "memory_util": float(r.memory_util),
                "storage_util": float(r.storage_util),
                "power_w": float(r.power_w),
            }
            for r in rows
        ]
        _write_text(canonical_json(docs) + "\n", sink)


def write_outcome_document(
    algorithm: str, outcome: AllocationOutcome, report: Report, sink: Sink
) -> None:
    """One canonical JSON document holding an outcome and its report."""

    doc = {
        "algorithm": algorithm,
        "outcome": outcome_to_dict(outcome),
        "report": report_to_dict(report),
    }
    _write_text(canonical_json(doc) + "\n", sink)


def comparison_rows(named_reports: Sequence[Tuple[str, Report]]) -> List[List[object]]:
    return [
        [
            name,
            float(report.mean_compute_utilization),
            float(report.utilization_stddev),
            float(report.total_power_w),
            report.node_count,
            report.unallocated_count,
        ]
        for name, report in named_reports
    ]


def write_comparison(named_reports: Sequence[Tuple[str, Report]], fmt: str, sink: Sink) -> None:
    """Three-row (or n-row) comparison table, CSV or canonical JSON."""

    if fmt not in ("json", "csv"):
        raise ValidationError(f"format must be json or csv, got {fmt!r}")
    rows = comparison_rows(named_reports)
    if fmt == "csv":
        _write_text(_csv_text(COMPARISON_COLUMNS, rows), sink)
    else:
        docs = [dict(zip(COMPARISON_COLUMNS, row)) for row in rows]
        _write_text(canonical_json({"rows": docs}) + "\n", sink)
