"""Cyclic time encodings for the forecaster's time branch."""
from __future__ import annotations

import numpy as np

from ..data.records import INTERVAL_MINUTES

N_TIME_FEATURES = 5
_MINUTES_PER_DAY = 24 * 60
_SLOTS = _MINUTES_PER_DAY // INTERVAL_MINUTES


def time_features(minutes: np.ndarray) -> np.ndarray:
    """Encode epoch minutes as (N, 5): sin/cos of half-hour-of-day,
    sin/cos of day-of-week, and a weekend flag."""
    minutes = np.asarray(minutes, dtype=np.int64)
    slot = (minutes % _MINUTES_PER_DAY) / INTERVAL_MINUTES
    slot_angle = 2.0 * np.pi * slot / _SLOTS
    dow = (minutes // _MINUTES_PER_DAY + 3) % 7  # epoch day 0 is a Thursday
    dow_angle = 2.0 * np.pi * dow / 7.0
    return np.column_stack([
        np.sin(slot_angle), np.cos(slot_angle),
        np.sin(dow_angle), np.cos(dow_angle),
        (dow >= 5).astype(np.float64),
    ])
