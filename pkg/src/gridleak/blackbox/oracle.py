"""Uniform query interface between the adversary and a forecasting model.

Only window values, timestamps, request ids, and scalar predictions ever
cross this boundary; weights, scalers, and hyperparameters stay behind it.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from ..data.records import INTERVAL_MINUTES
from ..errors import ProtocolError
from ..forecast.model import LoadForecaster


@dataclass
class ForecastQuery:
    request_id: int
    window: np.ndarray           # w consumption values
    times_minutes: np.ndarray    # w+1 epoch minutes, strictly increasing

    def __post_init__(self):
        self.window = np.asarray(self.window, dtype=np.float64)
        self.times_minutes = np.asarray(self.times_minutes, dtype=np.int64)


@dataclass
class ForecastResponse:
    request_id: int
    prediction: float


@dataclass
class OracleStats:
    """Monotone query counters, safe under concurrent connections."""

    total: int = 0
    per_client: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, client: str, n: int = 1) -> None:
        with self._lock:
            self.total += n
            self.per_client[client] = self.per_client.get(client, 0) + n

    def snapshot(self) -> dict:
        with self._lock:
            return {"total": self.total, "per_client": dict(self.per_client)}


def validate_query(window: np.ndarray, times_minutes: np.ndarray, w: int) -> None:
    """Raise ProtocolError with the wire error code on contract violations."""
    if window.ndim != 1 or len(window) != w:
        raise ProtocolError("BAD_WINDOW_LEN", f"expected {w} values, got {window.shape}")
    if not np.all(np.isfinite(window)):
        raise ProtocolError("MALFORMED", "window values must be finite")
    if times_minutes.ndim != 1 or len(times_minutes) != w + 1:
        raise ProtocolError("BAD_TIMESTAMPS",
                            f"expected {w + 1} timestamps, got {times_minutes.shape}")
    if np.any(np.diff(times_minutes) <= 0):
        raise ProtocolError("BAD_TIMESTAMPS", "timestamps must be strictly increasing")


class LocalOracle:
    """In-process binding of the oracle interface to a loaded model."""

    def __init__(self, model: LoadForecaster, stats: OracleStats | None = None,
                 client: str = "local"):
        model._check_ready()
        self._model = model
        self.stats = stats if stats is not None else OracleStats()
        self._client = client

    @property
    def w(self) -> int:
        return self._model.window

    @property
    def interval_minutes(self) -> int:
        return INTERVAL_MINUTES

    def query(self, q: ForecastQuery) -> ForecastResponse:
        validate_query(q.window, q.times_minutes, self.w)
        prediction = self._model.predict(q.window, q.times_minutes)
        self.stats.record(self._client)
        return ForecastResponse(q.request_id, float(prediction))

    def query_batch(self, queries: list[ForecastQuery]) -> list[ForecastResponse]:
        """Answer many independent queries in one vectorized model call."""
        for q in queries:
            validate_query(q.window, q.times_minutes, self.w)
        windows = np.stack([q.window for q in queries])
        targets = np.array([q.times_minutes[-1] for q in queries], dtype=np.int64)
        preds = self._model.predict_batch(windows, targets)
        self.stats.record(self._client, len(queries))
        return [ForecastResponse(q.request_id, float(p)) for q, p in zip(queries, preds)]
