"""Two-branch LSTM forecaster: model, tuning, and the size sweep."""
from .features import N_TIME_FEATURES, time_features
from .model import (LSTM_BASE_NODES, ForecastHyperparams, LoadForecaster,
                    build_model, count_parameters, load_forecaster,
                    save_forecaster, train_forecaster)
from .search import SEARCH_SPACE, random_search
from .sweep import DEFAULT_SIZES, SweepRow, size_sweep, sweep_csv

__all__ = [
    "time_features", "N_TIME_FEATURES",
    "ForecastHyperparams", "LoadForecaster", "LSTM_BASE_NODES",
    "build_model", "train_forecaster", "count_parameters",
    "save_forecaster", "load_forecaster",
    "random_search", "SEARCH_SPACE",
    "size_sweep", "sweep_csv", "SweepRow", "DEFAULT_SIZES",
]
