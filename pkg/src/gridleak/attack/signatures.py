"""Model signatures: recursive black-box querying of a forecaster.

A signature starts from a random window x0 ~ U(0,1)^w. Each step queries
the oracle with the current window and a timestamp grid anchored at the
seed date, then shifts the window left and appends the prediction mapped
into [0,1]. The mapping is a running min-max over all predictions seen so
far for this date, initialized to the unit interval, because the
adversary never learns the model's private scaler. After tau >= w steps
the initial noise is fully flushed and the window reflects only model
behavior.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..blackbox.oracle import ForecastQuery
from ..data.records import INTERVAL_MINUTES, parse_iso_minutes
from ..errors import ConfigError, OracleError

log = logging.getLogger(__name__)

MAX_FAILED_DATE_FRACTION = 0.1
MINUTES_PER_DAY = 24 * 60


@dataclass
class SignatureSpec:
    """Window size, recursion depth, and the K seed dates (epoch minutes)."""

    w: int
    tau: int
    dates_minutes: list[int]
    x0_seed: int = 0

    def __post_init__(self):
        if self.w < 1:
            raise ConfigError(f"w must be >= 1, got {self.w}")
        if self.tau < 1:
            raise ConfigError(f"tau must be >= 1, got {self.tau}")
        if not self.dates_minutes:
            raise ConfigError("need at least one seed date")
        self.dates_minutes = sorted(int(d) for d in self.dates_minutes)
        if len(set(self.dates_minutes)) != len(self.dates_minutes):
            raise ConfigError("seed dates must be distinct")

    @property
    def k(self) -> int:
        return len(self.dates_minutes)

    def dates_hash(self) -> str:
        text = ",".join(str(d) for d in self.dates_minutes)
        return hashlib.sha256(text.encode()).hexdigest()

    def to_dict(self) -> dict:
        return {"w": self.w, "tau": self.tau, "k": self.k,
                "dates_minutes": list(self.dates_minutes),
                "x0_seed": self.x0_seed, "dates_hash": self.dates_hash()}

    @classmethod
    def from_dict(cls, d: dict) -> "SignatureSpec":
        return cls(w=d["w"], tau=d["tau"], dates_minutes=d["dates_minutes"],
                   x0_seed=d["x0_seed"])


def sample_signature_dates(start_minutes: int, end_minutes: int, k: int,
                           seed: int) -> list[int]:
    """K distinct midnight-aligned dates inside [start, end)."""
    first_day = -(-start_minutes // MINUTES_PER_DAY)  # ceil
    last_day = end_minutes // MINUTES_PER_DAY
    n_days = last_day - first_day
    if n_days < k:
        raise ConfigError(f"date range holds {n_days} days, cannot sample {k} distinct dates")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 8]))
    days = rng.choice(n_days, size=k, replace=False)
    return sorted(int((first_day + d) * MINUTES_PER_DAY) for d in days)


@dataclass
class ModelSignature:
    values: np.ndarray
    date_minutes: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("signature values must be finite")


@dataclass
class SignatureSet:
    """K signatures ordered by ascending seed date, tagged with the source."""

    signatures: list[ModelSignature]
    source: str
    missing_dates: list[int] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.signatures)

    @property
    def w(self) -> int:
        return len(self.signatures[0].values)

    def is_complete(self) -> bool:
        return not self.missing_dates

    def matrix(self) -> np.ndarray:
        return np.stack([s.values for s in self.signatures])

    def dates(self) -> list[int]:
        return [s.date_minutes for s in self.signatures]


class _RunningMinMax:
    """Adversary-side normalizer; starts at [0, 1] (the query space)."""

    __slots__ = ("lo", "hi")

    def __init__(self):
        self.lo = 0.0
        self.hi = 1.0

    def feed(self, value: float) -> float:
        self.lo = min(self.lo, value)
        self.hi = max(self.hi, value)
        return (value - self.lo) / (self.hi - self.lo)


def _x0(spec: SignatureSpec, date_minutes: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([spec.x0_seed, int(date_minutes)]))
    return rng.uniform(0.0, 1.0, spec.w)


def _query_at(spec: SignatureSpec, date_minutes: int, step: int,
              window: np.ndarray, request_id: int) -> ForecastQuery:
    start = date_minutes + (step - 1) * INTERVAL_MINUTES
    times = start + INTERVAL_MINUTES * np.arange(spec.w + 1, dtype=np.int64)
    return ForecastQuery(request_id, window, times)


def signature_trajectory(oracle, spec: SignatureSpec, date_minutes: int) -> list[np.ndarray]:
    """All tau+1 windows of the recursion (x0 first); last one is the signature."""
    window = _x0(spec, date_minutes)
    norm = _RunningMinMax()
    trajectory = [window.copy()]
    for step in range(1, spec.tau + 1):
        resp = oracle.query(_query_at(spec, date_minutes, step, window, step))
        scaled = norm.feed(resp.prediction)
        window = np.append(window[1:], scaled)
        trajectory.append(window.copy())
    return trajectory


def gen_signature(oracle, spec: SignatureSpec, date_minutes: int) -> ModelSignature:
    """One signature: tau recursive queries anchored at the seed date."""
    return ModelSignature(signature_trajectory(oracle, spec, date_minutes)[-1],
                          date_minutes)


def gen_signature_set(oracle, spec: SignatureSpec, source: str = "") -> SignatureSet:
    """All K signatures, run in lockstep so batched oracles answer one
    batch of K queries per recursion step (tau * K queries total)."""
    if getattr(oracle, "w", spec.w) != spec.w:
        raise ConfigError(f"oracle advertises w={oracle.w}, spec has w={spec.w}")
    dates = list(spec.dates_minutes)
    windows = {d: _x0(spec, d) for d in dates}
    norms = {d: _RunningMinMax() for d in dates}
    active = list(dates)
    failed: list[int] = []
    batched = hasattr(oracle, "query_batch")

    for step in range(1, spec.tau + 1):
        queries = [_query_at(spec, d, step, windows[d], step * spec.k + i)
                   for i, d in enumerate(active)]
        if batched:
            responses = oracle.query_batch(queries)
        else:
            responses, still_active = [], []
            for q, d in zip(queries, active):
                try:
                    responses.append(oracle.query(q))
                    still_active.append(d)
                except OracleError as exc:
                    log.warning("signature date %d failed at step %d: %s", d, step, exc)
                    failed.append(d)
            active = still_active
            if len(failed) > MAX_FAILED_DATE_FRACTION * spec.k:
                raise OracleError(
                    f"{len(failed)}/{spec.k} signature dates failed; aborting this oracle")
        for d, resp in zip(active, responses):
            scaled = norms[d].feed(resp.prediction)
            windows[d] = np.append(windows[d][1:], scaled)

    signatures = [ModelSignature(windows[d], d) for d in dates if d not in failed]
    return SignatureSet(signatures, source, missing_dates=sorted(failed))


# -- persistence --------------------------------------------------------------

def save_signature_set(sig_set: SignatureSet, path) -> None:
    """CSV with a date column then s0..s{w-1} columns, one row per date."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mat = sig_set.matrix()
    stamps = np.array(sig_set.dates(), dtype="datetime64[m]")
    frame = pd.DataFrame(mat, columns=[f"s{i}" for i in range(mat.shape[1])])
    frame.insert(0, "date", np.datetime_as_string(stamps, unit="m"))
    frame.to_csv(path, index=False, float_format="%.17g")


def load_signature_set(path, source: str = "") -> SignatureSet:
    frame = pd.read_csv(Path(path), float_precision="round_trip")
    dates = [parse_iso_minutes(t) for t in frame["date"]]
    mat = frame.drop(columns=["date"]).to_numpy(dtype=np.float64)
    sigs = [ModelSignature(row, d) for row, d in zip(mat, dates)]
    return SignatureSet(sigs, source)


def save_signature_manifest(spec: SignatureSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True))


def load_signature_manifest(path) -> SignatureSpec:
    return SignatureSpec.from_dict(json.loads(Path(path).read_text()))
