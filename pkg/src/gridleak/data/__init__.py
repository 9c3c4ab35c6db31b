"""Household load data: synthetic generation, CSV ingestion, aux/honest split."""
from .ingest import load_csv
from .records import (INTERVAL_MINUTES, PROPERTY_NAMES, Dataset,
                      HouseholdRecord, PropertyVector, load_dataset,
                      save_dataset)
from .split import split_aux_honest
from .synthetic import DEFAULT_LABEL_PROBS, SynthConfig, generate_dataset

__all__ = [
    "INTERVAL_MINUTES", "PROPERTY_NAMES",
    "Dataset", "HouseholdRecord", "PropertyVector",
    "SynthConfig", "DEFAULT_LABEL_PROBS", "generate_dataset",
    "load_csv", "save_dataset", "load_dataset", "split_aux_honest",
]
