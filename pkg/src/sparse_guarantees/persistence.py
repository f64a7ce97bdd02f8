"""
Result files: trial-record CSV, aggregated table CSV and the JSON run manifest

Floats are written with repr() so they round-trip exactly, booleans as
"true"/"false" and missing values as empty fields. Every file is written to a
temporary sibling first and moved into place, so a crashed run never leaves a
half-written result behind.
"""

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from . import __version__
from .errors import InputError
from .experiments import ExperimentConfig, ExperimentTable, TableRow, TrialRecord


logger = logging.getLogger(__name__)

TRIAL_FIELDS = [f.name for f in fields(TrialRecord)]
TABLE_FIELDS = [f.name for f in fields(TableRow)]


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_float(text: str) -> Optional[float]:
    return float(text) if text != "" else None


def _parse_bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise InputError(f"Expected true/false, got {text!r}")
    return text == "true"


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Write text to path via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug(f"Wrote {path}")
    return path


def _csv_text(fieldnames: List[str], rows: List[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _format_value(row.get(k)) for k in fieldnames})
    return buffer.getvalue()


def write_trial_records_csv(records: List[TrialRecord], path: Union[str, Path]) -> Path:
    """One row per (grid_index, trial_index, estimator), in record order."""
    return atomic_write_text(path, _csv_text(TRIAL_FIELDS, [asdict(r) for r in records]))


def read_trial_records_csv(path: Union[str, Path]) -> List[TrialRecord]:
    """
    Read records written by write_trial_records_csv.

    Raises:
        InputError: If the header or a field does not parse
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or set(TRIAL_FIELDS) - set(reader.fieldnames):
            raise InputError(f"{path} is not a trial-record file (header {reader.fieldnames})")
        records = []
        for line_number, row in enumerate(reader, start=2):
            try:
                records.append(TrialRecord(
                    grid_index=int(row["grid_index"]),
                    trial_index=int(row["trial_index"]),
                    estimator=row["estimator"],
                    sq_error=float(row["sq_error"]),
                    support_exact=_parse_bool(row["support_exact"]),
                    solver_gap=_parse_float(row["solver_gap"]),
                    seed_used=int(row["seed_used"]),
                    failed=_parse_bool(row["failed"]),
                ))
            except (ValueError, InputError) as e:
                raise InputError(f"{path}:{line_number}: {e}") from e
    return records


def write_table_csv(table: ExperimentTable, path: Union[str, Path]) -> Path:
    """
    Aggregated rows; the axis column is named after the sweep axis.

    A sigma2 axis is already present as the sigma2 column and is not repeated.
    """
    duplicate_axis = table.axis_name in TABLE_FIELDS
    rows = []
    for row in table.rows:
        data = asdict(row)
        axis_value = data.pop("axis_value")
        if not duplicate_axis:
            data[table.axis_name] = axis_value
        rows.append(data)
    fieldnames = [
        table.axis_name if name == "axis_value" else name
        for name in TABLE_FIELDS
        if not (duplicate_axis and name == "axis_value")
    ]
    return atomic_write_text(path, _csv_text(fieldnames, rows))


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    """Pretty JSON with non-finite floats mapped to null."""
    return atomic_write_text(path, json.dumps(_json_safe(data), indent=2, sort_keys=False) + "\n")


def write_manifest(
    config: ExperimentConfig,
    output_dir: Union[str, Path],
    wall_time_seconds: float,
    files: List[str],
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Record what produced a run: the resolved config, seed, version and outputs.

    Returns:
        Path of manifest.json inside output_dir
    """
    manifest = {
        "version": __version__,
        "experiment": config.kind().value,
        "master_seed": config.master_seed,
        "config": config.model_dump(mode="json"),
        "wall_time_seconds": wall_time_seconds,
        "files": files,
    }
    if extra:
        manifest.update(extra)
    return write_json(manifest, Path(output_dir) / "manifest.json")
