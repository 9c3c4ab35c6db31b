"""Household consumption records, property labels, and dataset persistence."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import ConfigError

log = logging.getLogger(__name__)

INTERVAL_MINUTES = 30
SLOTS_PER_DAY = 24 * 60 // INTERVAL_MINUTES

# column order of labels.csv, fixed
PROPERTY_NAMES = (
    "retired", "electric_cooking", "children", "alone",
    "house_old", "detached", "console", "desktop",
)

METERS_HEADER = ["meter_id", "timestamp", "kwh"]
LABELS_HEADER = ["meter_id", *PROPERTY_NAMES]


def to_epoch_minutes(ts: datetime) -> int:
    return int(np.datetime64(ts.isoformat(), "m").astype(np.int64))


def minutes_to_datetime(minutes: int) -> datetime:
    return np.datetime64(int(minutes), "m").astype("datetime64[s]").item()


def parse_iso_minutes(text: str) -> int:
    """ISO-8601 timestamp -> epoch minutes (naive, minute resolution)."""
    return int(np.datetime64(text, "m").astype(np.int64))


@dataclass
class PropertyVector:
    """The eight binary household properties, in labels.csv column order."""

    retired: int
    electric_cooking: int
    children: int
    alone: int
    house_old: int
    detached: int
    console: int
    desktop: int

    def __post_init__(self):
        for name in PROPERTY_NAMES:
            v = getattr(self, name)
            if v not in (0, 1):
                raise ConfigError(f"property {name!r} must be 0 or 1, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PROPERTY_NAMES], dtype=np.int64)

    def get(self, name: str) -> int:
        if name not in PROPERTY_NAMES:
            raise ConfigError(f"unknown property {name!r}")
        return getattr(self, name)

    @classmethod
    def from_mapping(cls, row) -> "PropertyVector":
        return cls(**{n: int(row[n]) for n in PROPERTY_NAMES})


@dataclass
class HouseholdRecord:
    """One meter's half-hourly kWh series on a contiguous 30-minute grid."""

    meter_id: int
    readings: np.ndarray
    start_minutes: int  # epoch minutes of the first reading

    def __post_init__(self):
        self.readings = np.asarray(self.readings, dtype=np.float64)
        if self.meter_id <= 0:
            raise ConfigError(f"meter_id must be positive, got {self.meter_id}")
        if self.readings.ndim != 1:
            raise ConfigError("readings must be a 1-D series")
        if not np.all(np.isfinite(self.readings)) or np.any(self.readings < 0):
            raise ConfigError(f"meter {self.meter_id}: readings must be finite and non-negative")

    def __len__(self) -> int:
        return len(self.readings)

    @property
    def start(self) -> datetime:
        return minutes_to_datetime(self.start_minutes)

    def timestamps_minutes(self) -> np.ndarray:
        return self.start_minutes + INTERVAL_MINUTES * np.arange(len(self.readings), dtype=np.int64)

    def tail_days(self, days: int | None) -> "HouseholdRecord":
        """Last ``days`` whole days (or the full record when None/longer)."""
        if days is None or days * SLOTS_PER_DAY >= len(self.readings):
            return self
        n = days * SLOTS_PER_DAY
        return HouseholdRecord(
            meter_id=self.meter_id,
            readings=self.readings[-n:],
            start_minutes=int(self.start_minutes + INTERVAL_MINUTES * (len(self.readings) - n)),
        )


@dataclass
class Dataset:
    """Households with property labels; provenance is synthetic or ingested."""

    households: list[tuple[HouseholdRecord, PropertyVector]]
    provenance: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [rec.meter_id for rec, _ in self.households]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate meter_ids in dataset")

    def __len__(self) -> int:
        return len(self.households)

    def meter_ids(self) -> list[int]:
        return [rec.meter_id for rec, _ in self.households]

    def get(self, meter_id: int) -> tuple[HouseholdRecord, PropertyVector]:
        for rec, props in self.households:
            if rec.meter_id == meter_id:
                return rec, props
        raise KeyError(f"meter {meter_id} not in dataset")

    def labels_for(self, prop: str) -> np.ndarray:
        return np.array([props.get(prop) for _, props in self.households], dtype=np.int64)

    def sorted_by_meter_id(self) -> "Dataset":
        ordered = sorted(self.households, key=lambda pair: pair[0].meter_id)
        return Dataset(ordered, self.provenance, dict(self.meta))


def save_dataset(ds: Dataset, out_dir) -> Path:
    """Persist as meters.csv / labels.csv / manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames = []
    for rec, _ in ds.households:
        ts = (np.array(rec.start_minutes, dtype="datetime64[m]")
              + np.arange(len(rec.readings), dtype="timedelta64[m]") * INTERVAL_MINUTES)
        frames.append(pd.DataFrame({
            "meter_id": rec.meter_id,
            "timestamp": np.datetime_as_string(ts, unit="m"),
            "kwh": rec.readings,
        }))
    pd.concat(frames, ignore_index=True).to_csv(out / "meters.csv", index=False)
    labels = pd.DataFrame(
        [{"meter_id": rec.meter_id, **{n: props.get(n) for n in PROPERTY_NAMES}}
         for rec, props in ds.households])
    labels.to_csv(out / "labels.csv", index=False, columns=LABELS_HEADER)
    manifest = {"provenance": ds.provenance, **ds.meta}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out


def load_dataset(in_dir) -> Dataset:
    """Load a directory written by save_dataset (trusted format)."""
    src = Path(in_dir)
    manifest = json.loads((src / "manifest.json").read_text())
    meters = pd.read_csv(src / "meters.csv", float_precision="round_trip",
                         dtype={"meter_id": np.int64, "kwh": np.float64})
    labels = pd.read_csv(src / "labels.csv").set_index("meter_id")
    households = []
    for meter_id, group in meters.groupby("meter_id", sort=True):
        ts = group["timestamp"].to_numpy(dtype="datetime64[m]").astype(np.int64)
        if len(ts) > 1 and not np.all(np.diff(ts) == INTERVAL_MINUTES):
            raise ConfigError(f"meter {meter_id}: stored series is not on a 30-minute grid")
        rec = HouseholdRecord(int(meter_id), group["kwh"].to_numpy(), int(ts[0]))
        props = PropertyVector.from_mapping(labels.loc[int(meter_id)])
        households.append((rec, props))
    provenance = manifest.pop("provenance", "ingested")
    return Dataset(households, provenance, manifest)
