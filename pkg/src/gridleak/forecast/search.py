"""Budgeted random hyperparameter search over validation meters."""
from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from ..data.records import HouseholdRecord
from ..errors import ConfigError
from .model import ForecastHyperparams, train_forecaster

log = logging.getLogger(__name__)

# sampled search space; epochs/batch size stay at the incumbent's values
SEARCH_SPACE = {
    "learning_rate": ("log-uniform", 1e-3, 2e-2),
    "l2": ("choice", (0.0, 1e-6, 1e-5, 1e-4)),
    "lstm_nodes": ("choice", (8, 16, 32, 64)),
    "fc_nodes": ("choice", (16, 32, 64, 128)),
    "scaling": ("choice", ("minmax", "standard")),
    "window": ("choice", (24, 48)),
}


def _sample(rng: np.random.Generator, base: ForecastHyperparams) -> ForecastHyperparams:
    values = {}
    for name, spec in SEARCH_SPACE.items():
        if spec[0] == "log-uniform":
            lo, hi = spec[1], spec[2]
            values[name] = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        else:
            choices = spec[1]
            values[name] = choices[int(rng.integers(0, len(choices)))]
    return replace(base, **values)


def random_search(records: list[HouseholdRecord], budget: int, seed: int,
                  base: ForecastHyperparams | None = None) -> ForecastHyperparams:
    """Pick the candidate with the lowest mean test MAE across ``records``.

    Candidate 0 is always the incumbent (``base`` or the defaults), so the
    selection never does worse on the validation meters than not tuning.
    """
    if not records:
        raise ConfigError("random_search needs at least one validation meter")
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    base = (base or ForecastHyperparams()).validate()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
    candidates = [base] + [_sample(rng, base) for _ in range(budget - 1)]

    best_hp, best_mae = None, np.inf
    for k, hp in enumerate(candidates):
        maes = []
        for rec in records:
            _, mae = train_forecaster(rec, hp, seed=seed)
            maes.append(mae)
        mean_mae = float(np.mean(maes))
        log.info("search trial %d/%d: mean MAE %.4f (%s)", k + 1, budget, mean_mae, hp)
        if mean_mae < best_mae:
            best_hp, best_mae = hp, mean_mae
    return best_hp
