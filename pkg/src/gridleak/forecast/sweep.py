"""Model-size versus forecast-error sweep (honest-user sizing study)."""
from __future__ import annotations

from dataclasses import dataclass, replace

from ..data.records import HouseholdRecord
from ..errors import ConfigError
from .model import (LSTM_BASE_NODES, ForecastHyperparams, count_parameters,
                    train_forecaster)

FLOAT64_BYTES = 8

# LSTM_<h> convention: fully connected width is double the LSTM width
DEFAULT_SIZES = ((8, 16), (16, 32), (32, 64), (64, 128))


@dataclass
class SweepRow:
    size_label: str
    lstm_nodes: int
    fc_nodes: int
    params: int
    param_bytes: int
    test_mae: float
    data_bytes: int


def size_label(lstm_nodes: int, fc_nodes: int) -> str:
    if (lstm_nodes, fc_nodes) == LSTM_BASE_NODES:
        return "LSTM_base"
    return f"LSTM_{lstm_nodes}"


def size_sweep(record: HouseholdRecord, sizes, hp: ForecastHyperparams,
               seed: int) -> list[SweepRow]:
    """Train one model per (lstm_nodes, fc_nodes) size and tabulate parameter
    bytes, held-out MAE, and the household's own data size in bytes.

    Rows come back sorted by parameter count ascending.
    """
    if not sizes:
        raise ConfigError("size_sweep needs at least one size")
    data_bytes = len(record.readings) * FLOAT64_BYTES
    rows = []
    for lstm_nodes, fc_nodes in sizes:
        run_hp = replace(hp, lstm_nodes=lstm_nodes, fc_nodes=fc_nodes)
        model, mae = train_forecaster(record, run_hp, seed=seed)
        n_params = model.num_params()
        assert n_params == count_parameters(lstm_nodes, fc_nodes)
        rows.append(SweepRow(
            size_label=size_label(lstm_nodes, fc_nodes),
            lstm_nodes=lstm_nodes, fc_nodes=fc_nodes,
            params=n_params, param_bytes=n_params * FLOAT64_BYTES,
            test_mae=mae, data_bytes=data_bytes))
    rows.sort(key=lambda r: r.params)
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    lines = ["size_label,params,param_bytes,test_mae,data_bytes"]
    for r in rows:
        lines.append(f"{r.size_label},{r.params},{r.param_bytes},{r.test_mae:.6f},{r.data_bytes}")
    return "\n".join(lines) + "\n"
