"""Deterministic auxiliary/honest split by sorted meter ID."""
from __future__ import annotations

import math

from ..errors import ConfigError
from .records import Dataset

MIN_HOUSEHOLDS = 5


def split_aux_honest(ds: Dataset, aux_fraction: float = 0.8) -> tuple[Dataset, Dataset]:
    """First ceil(aux_fraction * n) meters by ascending ID go to the
    adversary's auxiliary set, the rest are the honest users."""
    if not 0.0 < aux_fraction < 1.0:
        raise ConfigError(f"aux_fraction must be in (0, 1), got {aux_fraction}")
    if len(ds) < MIN_HOUSEHOLDS:
        raise ConfigError(f"need at least {MIN_HOUSEHOLDS} households to split, got {len(ds)}")
    ordered = ds.sorted_by_meter_id()
    n_aux = math.ceil(aux_fraction * len(ordered))
    aux = Dataset(ordered.households[:n_aux], ds.provenance, dict(ds.meta))
    honest = Dataset(ordered.households[n_aux:], ds.provenance, dict(ds.meta))
    return aux, honest
