from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Iterable, Sequence

from ..config.manager import write_atomic
from ..core.types import RunResult

MEAN_COLUMNS = ("seed", "T", "m", "d", "sq_error", "max_encoding_error", "compliance_ok")
REGRESSION_COLUMNS = (
    "seed", "T", "m", "d", "k", "param_sq_error", "worst_case_pred_error", "singular_groups", "compliance_ok",
)
SWEEP_COLUMNS = (
    "algorithm", "axis", "value", "seed", "sq_error", "max_encoding_error", "compliance_ok", "status",
)
SGD_COLUMNS = ("t", "mean_L", "bound")


def format_cell(value: Any) -> str:
    """Floats carry 17 significant digits so the CSV round-trips exactly."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def render_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()


def emit(text: str, path: Path | None) -> None:
    """Write ``text`` atomically to ``path``, or to stdout when no path is given."""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        write_atomic(Path(path), text)


def mean_rows(results: Sequence[RunResult]) -> list[tuple]:
    return [
        (r.seed, r.T, r.m, r.d, r.squared_error, r.max_encoding_error, r.compliance_ok)
        for r in results
    ]


def regression_rows(results: Sequence[RunResult]) -> list[tuple]:
    return [
        (
            r.seed, r.T, r.m, r.d, r.k, r.squared_error,
            r.worst_case_pred_error, r.singular_groups, r.compliance_ok,
        )
        for r in results
    ]


def json_lines(records: Iterable[dict]) -> str:
    return "".join(json.dumps(record, separators=(",", ":"), sort_keys=True) + "\n" for record in records)


def results_json(results: Sequence[RunResult]) -> str:
    return "".join(r.to_json_line() + "\n" for r in results)
