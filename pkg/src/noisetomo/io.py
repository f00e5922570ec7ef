"""Measurement files, JSON reports and plot-ready tables.

Measurement file
----------------
Comma-separated text with a header row. Lines starting with ``#`` are
comments. Columns (by name, any order):

==========================  ========  =========================================
column                      required  meaning
==========================  ========  =========================================
``setting_id``              yes       integer, unique per file
``probe_mean``              one of    probe mean photon number
``blocked_no_clicks``       one of    dark pulses with the signal blocked
``pulses``                  yes       pulses fired (> 0)
``no_clicks``               yes       dark pulses, signal and probe together
``signal_only_pulses``      no        pulses of the signal-only run
``signal_only_no_clicks``   no        dark pulses of the signal-only run
==========================  ========  =========================================

Exactly one of ``probe_mean`` and ``blocked_no_clicks`` appears in a file.
The signal-only columns come together; an empty cell means no signal-only
data for that row.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .calibration import ClickRecord
from .errors import DataError
from .povm import ProbeSetting

__all__ = [
    "MEASUREMENT_COLUMNS",
    "read_measurements",
    "write_measurements",
    "to_jsonable",
    "dump_report",
    "write_report",
    "write_curves",
    "content_hash",
]

MEASUREMENT_COLUMNS = (
    "setting_id",
    "probe_mean",
    "blocked_no_clicks",
    "pulses",
    "no_clicks",
    "signal_only_pulses",
    "signal_only_no_clicks",
)
_INT_COLUMNS = {"setting_id", "blocked_no_clicks", "pulses", "no_clicks",
                "signal_only_pulses", "signal_only_no_clicks"}
REPORT_DIGITS = 12


def _parse_int(text, column, line):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {line}: column {column!r} is not a number: {text!r}") from None
    if not value.is_integer():
        raise DataError(f"line {line}: column {column!r} must be an integer, got {text!r}")
    return int(value)


def _parse_float(text, column, line):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {line}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"line {line}: column {column!r} is not finite")
    return value


def read_measurements(path):
    """Read a measurement file.

    Returns
    -------
    records : list of ClickRecord
    settings : list of ProbeSetting or None
        Probe means when the file carries a ``probe_mean`` column; ``None``
        when probe means must be derived from ``blocked_no_clicks``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        lines = [(i + 1, raw) for i, raw in enumerate(fh.read().splitlines())]
    body = [(n, raw) for n, raw in lines if raw.strip() and not raw.lstrip().startswith("#")]
    if not body:
        raise DataError(f"{path}: no header row")
    header_line, header_raw = body[0]
    header = [h.strip() for h in next(csv.reader([header_raw]))]
    unknown = [h for h in header if h not in MEASUREMENT_COLUMNS]
    if unknown:
        raise DataError(f"line {header_line}: unknown columns {unknown}")
    if len(set(header)) != len(header):
        raise DataError(f"line {header_line}: repeated column names")
    for required in ("setting_id", "pulses", "no_clicks"):
        if required not in header:
            raise DataError(f"line {header_line}: missing required column {required!r}")
    has_mean = "probe_mean" in header
    has_blocked = "blocked_no_clicks" in header
    if has_mean == has_blocked:
        raise DataError(
            f"line {header_line}: exactly one of 'probe_mean' and 'blocked_no_clicks' must be present"
        )
    if ("signal_only_pulses" in header) != ("signal_only_no_clicks" in header):
        raise DataError(f"line {header_line}: signal-only columns must appear together")

    rows = body[1:]
    if not rows:
        raise DataError(f"{path}: no settings")
    records, settings, seen = [], [], set()
    for line, raw in rows:
        cells = [c.strip() for c in next(csv.reader([raw]))]
        if len(cells) != len(header):
            raise DataError(f"line {line}: expected {len(header)} fields, found {len(cells)}")
        row = dict(zip(header, cells))
        values = {}
        for col, text in row.items():
            if text == "":
                if col in ("signal_only_pulses", "signal_only_no_clicks"):
                    values[col] = None
                    continue
                raise DataError(f"line {line}: empty value in column {col!r}")
            if col in _INT_COLUMNS:
                values[col] = _parse_int(text, col, line)
            else:
                values[col] = _parse_float(text, col, line)
        sid = values["setting_id"]
        if sid in seen:
            raise DataError(f"line {line}: duplicate setting_id {sid}")
        seen.add(sid)
        try:
            rec = ClickRecord(
                setting_id=sid,
                pulses=values["pulses"],
                no_clicks=values["no_clicks"],
                blocked_no_clicks=values.get("blocked_no_clicks"),
                signal_only_no_clicks=values.get("signal_only_no_clicks"),
                signal_only_pulses=values.get("signal_only_pulses"),
            )
            if has_mean:
                settings.append(ProbeSetting(sid, values["probe_mean"]))
        except ValueError as exc:
            raise DataError(f"line {line} (setting {sid}): {exc}") from None
        records.append(rec)
    return records, (settings if has_mean else None)


def write_measurements(path, records, settings=None, calibration="probe_mean"):
    """Write records in the measurement-file format.

    ``calibration="probe_mean"`` writes probe means from ``settings``;
    ``"blocked"`` writes the records' blocked-signal counts instead.
    """
    if calibration not in ("probe_mean", "blocked"):
        raise DataError(f"unknown calibration column {calibration!r}")
    records = list(records)
    with_signal = any(r.has_signal_only for r in records)
    cols = ["setting_id", calibration if calibration == "probe_mean" else "blocked_no_clicks",
            "pulses", "no_clicks"]
    if with_signal:
        cols += ["signal_only_pulses", "signal_only_no_clicks"]
    means = {}
    if calibration == "probe_mean":
        if settings is None:
            raise DataError("probe means requested but no settings given")
        means = {s.id: s.mean for s in settings}
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for r in records:
            if calibration == "probe_mean":
                calib = repr(float(means[r.setting_id]))
            else:
                if r.blocked_no_clicks is None:
                    raise DataError(f"setting {r.setting_id} has no blocked counts")
                calib = r.blocked_no_clicks
            row = [r.setting_id, calib, r.pulses, r.no_clicks]
            if with_signal:
                row += ["" if r.signal_only_pulses is None else r.signal_only_pulses,
                        "" if r.signal_only_no_clicks is None else r.signal_only_no_clicks]
            writer.writerow(row)


def _round(x):
    if not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if x == 0:
        return 0.0
    return float(f"{x:.{REPORT_DIGITS}g}")


def to_jsonable(obj):
    """Convert arrays, dataclasses and numpy scalars to plain JSON values,
    rounding floats to 12 significant digits."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_report(report) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_report(path, report):
    Path(path).write_text(dump_report(report))


def write_curves(path, setting_ids, probe_means, p_hat, p_model):
    """Per-setting ``(n_j, p_hat_j, p_model_j)`` rows for plotting."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["setting_id", "probe_mean", "p_hat", "p_model"])
        for row in zip(setting_ids, probe_means, p_hat, p_model):
            writer.writerow([int(row[0])] + [f"{float(v):.{REPORT_DIGITS}g}" for v in row[1:]])


def content_hash(*parts) -> str:
    """SHA-256 over the given byte strings or files, in order."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, (str, Path)) and Path(part).is_file():
            data = Path(part).read_bytes()
        elif isinstance(part, bytes):
            data = part
        else:
            data = str(part).encode()
        h.update(len(data).to_bytes(8, "little"))
        h.update(data)
    return h.hexdigest()
