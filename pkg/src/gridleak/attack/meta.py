"""Meta-classifiers: from signature matrices to property probabilities."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from ..cnn import ConvNetClassifier, load_classifier, save_classifier
from ..data.records import PROPERTY_NAMES, PropertyVector
from ..errors import ConfigError, ShapeError
from .signatures import SignatureSet, SignatureSpec, gen_signature_set

log = logging.getLogger(__name__)


@dataclass
class MetaClassifier:
    """A trained signature classifier bound to one property and one date list."""

    clf: ConvNetClassifier
    property: str
    k: int
    w: int
    dates_hash: str

    @property
    def cv_auc(self) -> float:
        return self.clf.cv_auc_


def train_meta(signature_sets: dict[int, SignatureSet],
               labels: dict[int, PropertyVector], prop: str, seed: int,
               dates_hash: str, classifier_params: dict | None = None) -> MetaClassifier:
    """Fit the signature classifier for one property on the shadow farm's
    signature sets (meters with incomplete sets are skipped)."""
    if prop not in PROPERTY_NAMES:
        raise ConfigError(f"unknown property {prop!r}")
    meters = sorted(m for m in signature_sets if m in labels)
    usable = []
    for m in meters:
        if signature_sets[m].is_complete():
            usable.append(m)
        else:
            log.warning("meter %d has an incomplete signature set, skipped", m)
    if not usable:
        raise ConfigError("no complete signature sets to train on")
    X = np.stack([signature_sets[m].matrix() for m in usable])
    y = np.array([labels[m].get(prop) for m in usable], dtype=np.int64)
    clf = ConvNetClassifier(**(classifier_params or {}),
                            seed=_meta_seed(seed, prop))
    clf.fit(X, y)
    k, w = X.shape[1], X.shape[2]
    log.info("meta[%s]: %d meters, stop at epoch %d, cv AUC %.3f",
             prop, len(usable), clf.best_epochs_, clf.cv_auc_)
    return MetaClassifier(clf, prop, k, w, dates_hash)


def _meta_seed(seed: int, prop: str) -> int:
    return int(np.random.SeedSequence([seed, 7, PROPERTY_NAMES.index(prop)])
               .generate_state(1)[0])


def infer_property(cm: MetaClassifier, sigs: SignatureSet) -> float:
    """Probability that the oracle's household has the property."""
    if not sigs.is_complete():
        raise ConfigError(f"signature set has {len(sigs.missing_dates)} missing dates")
    if (sigs.k, sigs.w) != (cm.k, cm.w):
        raise ShapeError(f"classifier expects K={cm.k}, w={cm.w}; "
                         f"got K={sigs.k}, w={sigs.w}")
    return float(cm.clf.predict_proba(sigs.matrix()[None, :, :])[0, 1])


def run_attack(honest_oracles: dict[int, object], metas: dict[str, MetaClassifier],
               spec: SignatureSpec, properties: list[str] | None = None,
               ) -> tuple[pd.DataFrame, dict[int, SignatureSet]]:
    """Active stage: signature each honest oracle with the offline stage's
    dates, then score every requested property.

    Returns (probability matrix [meters x properties], signature sets).
    """
    properties = list(properties) if properties is not None else sorted(metas)
    usable_props = []
    for prop in properties:
        if prop not in metas:
            log.warning("no meta-classifier for property %r, skipped", prop)
            continue
        cm = metas[prop]
        if cm.dates_hash != spec.dates_hash():
            raise ConfigError(
                f"meta-classifier for {prop!r} was trained on a different "
                f"date list (hash {cm.dates_hash[:12]} != {spec.dates_hash()[:12]})")
        usable_props.append(prop)

    meters = sorted(honest_oracles)
    sig_sets: dict[int, SignatureSet] = {}
    probs = np.full((len(meters), len(usable_props)), np.nan)
    for i, meter in enumerate(meters):
        sig_sets[meter] = gen_signature_set(honest_oracles[meter], spec,
                                            source=f"honest-{meter}")
        for j, prop in enumerate(usable_props):
            probs[i, j] = infer_property(metas[prop], sig_sets[meter])
    matrix = pd.DataFrame(probs, index=meters, columns=usable_props)
    return matrix, sig_sets


# -- persistence -----------------------------------------------------------------

def save_meta(cm: MetaClassifier, base_path) -> None:
    save_classifier(cm.clf, base_path, extra={
        "property": cm.property, "k": cm.k, "w": cm.w, "dates_hash": cm.dates_hash})


def load_meta(base_path) -> MetaClassifier:
    clf, sidecar = load_classifier(base_path)
    return MetaClassifier(clf, sidecar["property"], sidecar["k"], sidecar["w"],
                          sidecar["dates_hash"])
