"""CSV ingestion for real half-hourly data (schema validated row by row)."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import IngestError
from .records import (INTERVAL_MINUTES, LABELS_HEADER, METERS_HEADER,
                      Dataset, HouseholdRecord, PropertyVector)

log = logging.getLogger(__name__)

MAX_FILL_INTERVALS = 2


def load_csv(meters_path, labels_path, min_readings: int = 49) -> Dataset:
    """Ingest ``meter_id,timestamp,kwh`` plus a labels file into a Dataset.

    Gaps of up to two missing intervals are forward-filled; longer gaps
    split the series and the longest segment is kept. Meters shorter than
    ``min_readings`` after that, or without a label row, are dropped with
    a warning. Any unparsable row rejects the whole file, naming the row.
    """
    meters_path, labels_path = Path(meters_path), Path(labels_path)
    readings = _read_meters(meters_path)
    labels = _read_labels(labels_path)

    households = []
    for meter_id in sorted(readings):
        ts, kwh = readings[meter_id]
        order = np.argsort(ts, kind="stable")
        ts, kwh = ts[order], kwh[order]
        if len(np.unique(ts)) != len(ts):
            raise IngestError(f"{meters_path}: meter {meter_id} has duplicate timestamps")
        series, start = _fill_or_split(meter_id, ts, kwh)
        if len(series) < min_readings:
            log.warning("meter %d: only %d readings after gap handling (< %d), excluded",
                        meter_id, len(series), min_readings)
            continue
        if meter_id not in labels:
            log.warning("meter %d: no label row, excluded", meter_id)
            continue
        households.append((HouseholdRecord(meter_id, series, int(start)), labels[meter_id]))
    return Dataset(households, "ingested",
                   {"meters_file": str(meters_path), "labels_file": str(labels_path)})


def _read_meters(path: Path) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except Exception as exc:
        raise IngestError(f"{path}: cannot read CSV ({exc})") from exc
    if list(frame.columns) != METERS_HEADER:
        raise IngestError(f"{path}: header must be {','.join(METERS_HEADER)}")

    meter_ids = _parse_int_column(path, frame["meter_id"], "meter_id", minimum=1)
    kwh = _parse_float_column(path, frame["kwh"])
    minutes = _parse_timestamp_column(path, frame["timestamp"])

    out: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for meter_id in np.unique(meter_ids):
        mask = meter_ids == meter_id
        out[int(meter_id)] = (minutes[mask], kwh[mask])
    return out


def _read_labels(path: Path) -> dict[int, PropertyVector]:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except Exception as exc:
        raise IngestError(f"{path}: cannot read CSV ({exc})") from exc
    if list(frame.columns) != LABELS_HEADER:
        raise IngestError(f"{path}: header must be {','.join(LABELS_HEADER)}")
    labels: dict[int, PropertyVector] = {}
    for i, row in enumerate(frame.itertuples(index=False)):
        line = i + 2  # header is line 1
        try:
            meter_id = int(row.meter_id)
            values = {name: int(getattr(row, name)) for name in LABELS_HEADER[1:]}
        except ValueError as exc:
            raise IngestError(f"{path}: row {line}: {exc}") from exc
        for name, v in values.items():
            if v not in (0, 1):
                raise IngestError(f"{path}: row {line}: {name} must be 0 or 1, got {v}")
        if meter_id in labels:
            raise IngestError(f"{path}: row {line}: duplicate labels for meter {meter_id}")
        labels[meter_id] = PropertyVector(**values)
    return labels


def _fill_or_split(meter_id: int, minutes: np.ndarray, kwh: np.ndarray) -> tuple[np.ndarray, int]:
    """Forward-fill short gaps; on long gaps keep the longest segment."""
    steps = np.diff(minutes) // INTERVAL_MINUTES
    breaks = np.flatnonzero(steps > MAX_FILL_INTERVALS + 1)
    bounds = np.concatenate(([0], breaks + 1, [len(minutes)]))
    spans = [(int(minutes[b2 - 1] - minutes[b1]), b1, b2)
             for b1, b2 in zip(bounds[:-1], bounds[1:])]
    span, b1, b2 = max(spans, key=lambda it: (it[0], -it[1]))
    if len(spans) > 1:
        log.warning("meter %d: %d gap(s) longer than %d intervals, keeping longest segment",
                    meter_id, len(spans) - 1, MAX_FILL_INTERVALS)
    seg_min, seg_kwh = minutes[b1:b2], kwh[b1:b2]
    n = span // INTERVAL_MINUTES + 1
    filled = np.empty(n, dtype=np.float64)
    idx = (seg_min - seg_min[0]) // INTERVAL_MINUTES
    filled[:] = np.nan
    filled[idx] = seg_kwh
    # forward fill the <= MAX_FILL_INTERVALS holes
    holes = np.isnan(filled)
    if holes.any():
        last = np.maximum.accumulate(np.where(~holes, np.arange(n), 0))
        filled = filled[last]
    return filled, int(seg_min[0])


def _parse_int_column(path: Path, col: pd.Series, name: str, minimum: int) -> np.ndarray:
    try:
        values = col.to_numpy(dtype=np.str_).astype(np.int64)
    except ValueError:
        _raise_at_first_bad(path, col, lambda s: s.strip().lstrip("-").isdigit(), name)
        raise  # unreachable
    if (values < minimum).any():
        row = int(np.flatnonzero(values < minimum)[0]) + 2
        raise IngestError(f"{path}: row {row}: {name} must be >= {minimum}")
    return values


def _parse_float_column(path: Path, col: pd.Series) -> np.ndarray:
    try:
        values = col.to_numpy(dtype=np.str_).astype(np.float64)
    except ValueError:
        _raise_at_first_bad(path, col, _is_float, "kwh")
        raise
    bad = ~np.isfinite(values) | (values < 0)
    if bad.any():
        row = int(np.flatnonzero(bad)[0]) + 2
        raise IngestError(f"{path}: row {row}: kwh must be finite and non-negative")
    return values


def _parse_timestamp_column(path: Path, col: pd.Series) -> np.ndarray:
    try:
        stamps = col.to_numpy(dtype=np.str_).astype("datetime64[m]")
    except ValueError:
        _raise_at_first_bad(path, col, _is_timestamp, "timestamp")
        raise
    minutes = stamps.astype(np.int64)
    misaligned = minutes % INTERVAL_MINUTES != 0
    if misaligned.any():
        row = int(np.flatnonzero(misaligned)[0]) + 2
        raise IngestError(f"{path}: row {row}: timestamp not on the 30-minute grid")
    return minutes


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _is_timestamp(s: str) -> bool:
    try:
        np.datetime64(s, "m")
        return True
    except ValueError:
        return False


def _raise_at_first_bad(path: Path, col: pd.Series, ok, name: str) -> None:
    for i, raw in enumerate(col):
        if not ok(str(raw)):
            raise IngestError(f"{path}: row {i + 2}: bad {name} value {raw!r}")
    raise IngestError(f"{path}: column {name} failed to parse")
