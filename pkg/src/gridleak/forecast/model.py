"""Two-branch LSTM next-step load forecaster.

Branch one runs an LSTM over the scaled consumption window; branch two
passes the predicted step's time encoding through a dense layer. Both
outputs are concatenated into a linear head. Training minimizes squared
error on next-step prediction; the reported error is MAE in kWh on the
chronological 20% tail.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ..data.records import HouseholdRecord
from ..errors import ConfigError, DivergenceError, ShapeError
from ..nn import autodiff as ad
from ..nn.autodiff import Variable
from ..nn.container import load_tensors, save_tensors
from ..nn.lstm import lstm_sequence, lstm_sequence_forward
from ..nn.optim import Adam
from ..nn.scaling import SCALER_KINDS, ValueScaler
from .features import N_TIME_FEATURES, time_features

log = logging.getLogger(__name__)

WEIGHT_NAMES = ("lstm/wx", "lstm/wh", "lstm/b", "time/w", "time/b", "head/w", "head/b")


@dataclass
class ForecastHyperparams:
    """The tunable bundle: learning rate, L2, layer widths, scaler, window."""

    learning_rate: float = 5e-3
    l2: float = 1e-6
    lstm_nodes: int = 32
    fc_nodes: int = 64
    scaling: str = "minmax"
    window: int = 48
    epochs: int = 30
    batch_size: int = 64

    def validate(self) -> "ForecastHyperparams":
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.l2 < 0:
            raise ConfigError(f"l2 must be >= 0, got {self.l2}")
        if self.lstm_nodes < 1 or self.fc_nodes < 1:
            raise ConfigError("lstm_nodes and fc_nodes must be >= 1")
        if self.window < 2:
            raise ConfigError(f"window must be >= 2, got {self.window}")
        if self.scaling not in SCALER_KINDS:
            raise ConfigError(f"scaling must be one of {SCALER_KINDS}, got {self.scaling!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        return self

    def to_kwargs(self) -> dict:
        return asdict(self)


# honest-user preset reported for the base model (110 LSTM / 174 FC nodes)
LSTM_BASE_NODES = (110, 174)


def count_parameters(lstm_nodes: int, fc_nodes: int) -> int:
    """Closed-form parameter count of the two-branch architecture."""
    h, f = lstm_nodes, fc_nodes
    lstm = 4 * h * h + 8 * h           # wx (1,4H) + wh (H,4H) + b (4H)
    time_branch = N_TIME_FEATURES * f + f
    head = (h + f) + 1
    return lstm + time_branch + head


class LoadForecaster(BaseEstimator):
    """Per-household forecaster with a sklearn-style fit/predict surface."""

    def __init__(self, lstm_nodes: int = 32, fc_nodes: int = 64,
                 learning_rate: float = 5e-3, l2: float = 1e-6,
                 scaling: str = "minmax", window: int = 48,
                 epochs: int = 30, batch_size: int = 64, seed: int = 0):
        self.lstm_nodes = lstm_nodes
        self.fc_nodes = fc_nodes
        self.learning_rate = learning_rate
        self.l2 = l2
        self.scaling = scaling
        self.window = window
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    # -- construction ----------------------------------------------------
    def hyperparams(self) -> ForecastHyperparams:
        return ForecastHyperparams(
            learning_rate=self.learning_rate, l2=self.l2,
            lstm_nodes=self.lstm_nodes, fc_nodes=self.fc_nodes,
            scaling=self.scaling, window=self.window,
            epochs=self.epochs, batch_size=self.batch_size).validate()

    def initialize(self) -> "LoadForecaster":
        """Deterministic weight init from the seed; no scaler yet."""
        self.hyperparams()
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 2]))
        h, f = self.lstm_nodes, self.fc_nodes
        bx, bh = 1.0, 1.0 / np.sqrt(h)
        bt = 1.0 / np.sqrt(N_TIME_FEATURES)
        bo = 1.0 / np.sqrt(h + f)
        self.weights_ = {
            "lstm/wx": rng.uniform(-bx, bx, (1, 4 * h)),
            "lstm/wh": rng.uniform(-bh, bh, (h, 4 * h)),
            "lstm/b": rng.uniform(-bh, bh, 4 * h),
            "time/w": rng.uniform(-bt, bt, (N_TIME_FEATURES, f)),
            "time/b": rng.uniform(-bt, bt, f),
            "head/w": rng.uniform(-bo, bo, (h + f, 1)),
            "head/b": rng.uniform(-bo, bo, 1),
        }
        return self

    def num_params(self) -> int:
        return int(sum(w.size for w in self.weights_.values()))

    # -- training ----------------------------------------------------------
    def fit(self, record: HouseholdRecord) -> "LoadForecaster":
        hp = self.hyperparams()
        w = self.window
        series = record.readings
        n = len(series)
        if n < w + 10:
            raise ConfigError(f"meter {record.meter_id}: need at least window+10 "
                              f"readings, got {n} for window {w}")
        split = int(0.8 * n)
        if split <= w:
            raise ConfigError(f"meter {record.meter_id}: series too short to hold "
                              f"a training window of {w}")

        self.initialize()
        self.scaler_ = ValueScaler(self.scaling).fit(series[:split])
        scaled = self.scaler_.transform(series)
        windows = np.lib.stride_tricks.sliding_window_view(scaled, w)[:-1]
        targets = scaled[w:]
        feats = time_features(record.timestamps_minutes())[w:]
        n_train = split - w

        params = {k: Variable(v) for k, v in self.weights_.items()}
        opt = Adam(params, lr=self.learning_rate, weight_decay=self.l2)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 3]))
        losses = []
        try:
            for _ in range(self.epochs):
                perm = rng.permutation(n_train)
                epoch_loss = 0.0
                for lo in range(0, n_train, self.batch_size):
                    idx = perm[lo:lo + self.batch_size]
                    opt.zero_grad()
                    pred = self._forward_graph(windows[idx], feats[idx], params)
                    err = ad.add(pred, -targets[idx][:, None])
                    loss = ad.vmean(ad.square(err))
                    loss.backward()
                    opt.step()
                    epoch_loss += float(loss.data) * len(idx)
                epoch_loss /= n_train
                if not np.isfinite(epoch_loss):
                    raise DivergenceError("training loss is not finite")
                losses.append(epoch_loss)
        except DivergenceError as exc:
            raise DivergenceError(
                f"meter {record.meter_id}: diverged with hyperparams {hp}") from exc

        self.weights_ = {k: p.data for k, p in params.items()}
        self.train_losses_ = losses
        self.meter_id_ = record.meter_id
        test_pred = self.predict_batch(
            np.lib.stride_tricks.sliding_window_view(series, w)[split - w:-1],
            record.timestamps_minutes()[split:])
        self.test_mae_ = float(np.mean(np.abs(test_pred - series[split:])))
        return self

    def _forward_graph(self, windows: np.ndarray, feats: np.ndarray, params) -> Variable:
        h = lstm_sequence(windows[:, :, None], params["lstm/wx"],
                          params["lstm/wh"], params["lstm/b"])
        t = ad.tanh(ad.add(ad.matmul(feats, params["time/w"]), params["time/b"]))
        merged = ad.concat([h, t], axis=1)
        return ad.add(ad.matmul(merged, params["head/w"]), params["head/b"])

    # -- inference -----------------------------------------------------------
    def predict(self, window: np.ndarray, times_minutes: np.ndarray) -> float:
        """Next-step consumption in kWh for one window of w values and w+1
        timestamps (the last timestamp is the step being predicted)."""
        window = np.asarray(window, dtype=np.float64)
        times_minutes = np.asarray(times_minutes, dtype=np.int64)
        if window.shape != (self.window,):
            raise ShapeError(f"window must have length {self.window}, got {window.shape}")
        if times_minutes.shape != (self.window + 1,):
            raise ShapeError(f"need {self.window + 1} timestamps, got {times_minutes.shape}")
        return float(self.predict_batch(window[None, :], times_minutes[-1:])[0])

    def predict_batch(self, windows: np.ndarray, target_minutes: np.ndarray) -> np.ndarray:
        """Vectorized predict: (B, w) windows + (B,) target timestamps -> kWh."""
        self._check_ready()
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim != 2 or windows.shape[1] != self.window:
            raise ShapeError(f"windows must be (B, {self.window}), got {windows.shape}")
        w = self.weights_
        scaled = self.scaler_.transform(windows.reshape(-1)).reshape(windows.shape)
        h = lstm_sequence_forward(scaled[:, :, None], w["lstm/wx"], w["lstm/wh"], w["lstm/b"])
        t = np.tanh(time_features(target_minutes) @ w["time/w"] + w["time/b"])
        out = np.concatenate([h, t], axis=1) @ w["head/w"] + w["head/b"]
        return self.scaler_.inverse_transform(out[:, 0])

    def _check_ready(self) -> None:
        if not hasattr(self, "weights_") or not hasattr(self, "scaler_"):
            raise RuntimeError("forecaster has no weights/scaler; call fit() "
                               "or load one from disk")


def build_model(hp: ForecastHyperparams, seed: int) -> LoadForecaster:
    """Initialized (untrained) forecaster; weights deterministic in seed."""
    return LoadForecaster(**hp.validate().to_kwargs(), seed=seed).initialize()


def train_forecaster(record: HouseholdRecord, hp: ForecastHyperparams,
                     seed: int) -> tuple[LoadForecaster, float]:
    model = LoadForecaster(**hp.validate().to_kwargs(), seed=seed).fit(record)
    return model, model.test_mae_


# -- persistence ------------------------------------------------------------

def save_forecaster(model: LoadForecaster, base_path) -> None:
    """Weights + scaler into <base>.sglk, metadata into <base>.json."""
    model._check_ready()
    base = Path(base_path)
    tensors = dict(model.weights_)
    tensors.update(model.scaler_.to_tensors())
    tensors["optim/learning_rate"] = np.array([model.learning_rate])
    tensors["optim/l2"] = np.array([model.l2])
    save_tensors(base.with_suffix(".sglk"), tensors)
    sidecar = {
        "hyperparams": asdict(model.hyperparams()),
        "meter_id": getattr(model, "meter_id_", None),
        "test_mae": getattr(model, "test_mae_", None),
        "seed": model.seed,
    }
    base.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_forecaster(base_path) -> LoadForecaster:
    base = Path(base_path)
    sidecar = json.loads(base.with_suffix(".json").read_text())
    tensors = load_tensors(base.with_suffix(".sglk"))
    model = LoadForecaster(**sidecar["hyperparams"], seed=sidecar["seed"])
    model.weights_ = {k: tensors[k] for k in WEIGHT_NAMES}
    model.scaler_ = ValueScaler.from_tensors(tensors)
    if sidecar.get("meter_id") is not None:
        model.meter_id_ = sidecar["meter_id"]
    if sidecar.get("test_mae") is not None:
        model.test_mae_ = sidecar["test_mae"]
    return model
