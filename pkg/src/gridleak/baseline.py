"""Raw-data upper bound: classify properties straight from consumption.

Uses the same classifier family and training protocol as the
meta-classifier; the only difference is the input representation
(days x 48 raw matrices instead of signature matrices).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .cnn import ConvNetClassifier, load_classifier, save_classifier
from .data.records import PROPERTY_NAMES, Dataset, HouseholdRecord, SLOTS_PER_DAY
from .errors import ConfigError
from .nn.scaling import fit_scaler

log = logging.getLogger(__name__)

MIN_DAYS = 14
MINUTES_PER_DAY = 24 * 60


def full_day_count(record: HouseholdRecord) -> int:
    lead = (-record.start_minutes) % MINUTES_PER_DAY // 30
    return max(0, (len(record.readings) - lead) // SLOTS_PER_DAY)


def featurize_raw(record: HouseholdRecord, max_days: int) -> np.ndarray:
    """Most recent ``max_days`` midnight-aligned days as a (D, 48) matrix,
    min-max scaled per household; partial edge days are dropped."""
    lead = (-record.start_minutes) % MINUTES_PER_DAY // 30
    n_days = (len(record.readings) - lead) // SLOTS_PER_DAY
    if n_days < MIN_DAYS:
        raise ConfigError(f"meter {record.meter_id}: {n_days} full days "
                          f"< required {MIN_DAYS}")
    mat = record.readings[lead:lead + n_days * SLOTS_PER_DAY].reshape(n_days, SLOTS_PER_DAY)
    mat = mat[-max_days:]
    scaler = fit_scaler("minmax", mat.reshape(-1))
    return scaler.transform(mat.reshape(-1)).reshape(mat.shape)


@dataclass
class BaselineClassifier:
    clf: ConvNetClassifier
    property: str
    days: int  # effective day count every input is trimmed to

    @property
    def cv_auc(self) -> float:
        return self.clf.cv_auc_


def train_baseline(aux: Dataset, prop: str, seed: int, max_days: int = 60,
                   classifier_params: dict | None = None) -> BaselineClassifier:
    """Fit the raw-consumption classifier for one property on the aux set."""
    if prop not in PROPERTY_NAMES:
        raise ConfigError(f"unknown property {prop!r}")
    days = min([max_days] + [full_day_count(rec) for rec, _ in aux.households])
    if days < MIN_DAYS:
        raise ConfigError(f"shortest aux household has {days} full days < {MIN_DAYS}")
    ordered = aux.sorted_by_meter_id()
    X = np.stack([featurize_raw(rec, days) for rec, _ in ordered.households])
    y = np.array([props.get(prop) for _, props in ordered.households], dtype=np.int64)
    clf = ConvNetClassifier(**(classifier_params or {}), seed=_baseline_seed(seed, prop))
    clf.fit(X, y)
    log.info("baseline[%s]: %d meters x %d days, stop at epoch %d, cv AUC %.3f",
             prop, len(y), days, clf.best_epochs_, clf.cv_auc_)
    return BaselineClassifier(clf, prop, days)


def _baseline_seed(seed: int, prop: str) -> int:
    return int(np.random.SeedSequence([seed, 10, PROPERTY_NAMES.index(prop)])
               .generate_state(1)[0])


def predict_baseline(bc: BaselineClassifier, matrix: np.ndarray) -> float:
    """Probability of the property for one (days, 48) raw matrix."""
    matrix = np.asarray(matrix, dtype=np.float64)
    return float(bc.clf.predict_proba(matrix[None, :, :])[0, 1])


def baseline_scores(classifiers: dict[str, BaselineClassifier],
                    households: Dataset) -> pd.DataFrame:
    """Probability matrix (meters x properties) on a held-out dataset."""
    props = sorted(classifiers)
    meters = sorted(households.meter_ids())
    scores = np.full((len(meters), len(props)), np.nan)
    for i, meter in enumerate(meters):
        rec, _ = households.get(meter)
        for j, prop in enumerate(props):
            bc = classifiers[prop]
            scores[i, j] = predict_baseline(bc, featurize_raw(rec, bc.days))
    return pd.DataFrame(scores, index=meters, columns=props)


def save_baseline(bc: BaselineClassifier, base_path) -> None:
    save_classifier(bc.clf, base_path, extra={"property": bc.property, "days": bc.days})


def load_baseline(base_path) -> BaselineClassifier:
    clf, sidecar = load_classifier(base_path)
    return BaselineClassifier(clf, sidecar["property"], sidecar["days"])
