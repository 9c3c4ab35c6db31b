"""Small convolutional binary classifier over 2-D inputs.

One family serves both consumers: meta-classifiers read K x w signature
matrices, the raw-data baseline reads days x 48 consumption matrices, so
the two differ only in what they are fed. Stopping epoch is chosen by
k-fold cross-validation on the training set, then the final model is
refit on everything.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import StratifiedKFold

from .errors import ConfigError, ShapeError
from .metrics import roc_auc
from .nn import autodiff as ad
from .nn.autodiff import Variable
from .nn.container import load_tensors, save_tensors
from .nn.conv import conv2d, global_avg_pool
from .nn.optim import Adam

log = logging.getLogger(__name__)


class ConvNetClassifier(BaseEstimator, ClassifierMixin):
    """Stacked stride-2 conv blocks, global average pooling, logistic head."""

    def __init__(self, channels: tuple = (6, 12, 24), kernel: int = 3,
                 stride: int = 2, learning_rate: float = 3e-3, l2: float = 1e-5,
                 epochs: int = 25, batch_size: int = 40, folds: int = 5,
                 class_weight: str | None = "balanced", seed: int = 0):
        self.channels = channels
        self.kernel = kernel
        self.stride = stride
        self.learning_rate = learning_rate
        self.l2 = l2
        self.epochs = epochs
        self.batch_size = batch_size
        self.folds = folds
        self.class_weight = class_weight
        self.seed = seed

    # -- weights -----------------------------------------------------------
    def _init_params(self, rng: np.random.Generator) -> dict[str, Variable]:
        params: dict[str, Variable] = {}
        in_ch = 1
        k = self.kernel
        for i, out_ch in enumerate(self.channels):
            bound = 1.0 / np.sqrt(in_ch * k * k)
            params[f"conv{i}/w"] = Variable(rng.uniform(-bound, bound, (out_ch, in_ch, k, k)))
            params[f"conv{i}/b"] = Variable(rng.uniform(-bound, bound, out_ch))
            in_ch = out_ch
        bound = 1.0 / np.sqrt(in_ch)
        params["head/w"] = Variable(rng.uniform(-bound, bound, (in_ch, 1)))
        params["head/b"] = Variable(rng.uniform(-bound, bound, 1))
        return params

    def _logits(self, x: np.ndarray, params) -> Variable:
        h = x
        for i in range(len(self.channels)):
            h = ad.tanh(conv2d(h, params[f"conv{i}/w"], params[f"conv{i}/b"],
                               stride=self.stride, padding=1))
        pooled = global_avg_pool(h)
        return ad.add(ad.matmul(pooled, params["head/w"]), params["head/b"])

    # -- training ------------------------------------------------------------
    def fit(self, X, y) -> "ConvNetClassifier":
        X = self._as_batch(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.int64)
        if len(X) != len(y):
            raise ShapeError(f"{len(X)} inputs vs {len(y)} labels")
        counts = np.bincount(y, minlength=2)
        if len(np.unique(y)) < 2:
            raise ConfigError("labels are single-class; nothing to learn")
        if counts.min() < 2:
            raise ConfigError(f"need at least 2 samples per class, got {counts.tolist()}")

        n_splits = int(min(self.folds, counts.min()))
        splitter = StratifiedKFold(n_splits=n_splits, shuffle=True,
                                   random_state=self.seed % (2 ** 31))
        val_losses = np.zeros((n_splits, self.epochs))
        val_aucs = np.zeros((n_splits, self.epochs))
        for f, (tr, va) in enumerate(splitter.split(X, y)):
            curves = self._train_run(X[tr], y[tr], fold=f, track=(X[va], y[va]))
            val_losses[f] = curves["val_loss"]
            val_aucs[f] = curves["val_auc"]

        best = int(np.argmin(val_losses.mean(axis=0)))
        self.best_epochs_ = best + 1
        self.cv_auc_ = float(val_aucs.mean(axis=0)[best])
        self.input_shape_ = X.shape[2:]
        self.classes_ = np.array([0, 1])
        final = self._train_run(X, y, fold=n_splits, epochs=self.best_epochs_)
        self.weights_ = final["params"]
        return self

    def _train_run(self, X, y, fold: int, track=None, epochs: int | None = None) -> dict:
        epochs = epochs or self.epochs
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 6, fold]))
        params = self._init_params(rng)
        opt = Adam(params, lr=self.learning_rate, weight_decay=self.l2)
        weights = self._sample_weights(y)
        val_loss = np.zeros(epochs)
        val_auc = np.zeros(epochs)
        n = len(X)
        for epoch in range(epochs):
            perm = rng.permutation(n)
            for lo in range(0, n, self.batch_size):
                idx = perm[lo:lo + self.batch_size]
                opt.zero_grad()
                z = self._logits(X[idx], params)
                loss = _weighted_bce(z, y[idx], weights[idx])
                loss.backward()
                opt.step()
            if track is not None:
                xv, yv = track
                zv = self._forward_np(xv, params)
                val_loss[epoch] = _bce_np(zv, yv)
                val_auc[epoch] = roc_auc(_sigmoid(zv), yv)
        return {"params": {k: p.data for k, p in params.items()},
                "val_loss": val_loss, "val_auc": val_auc}

    def _sample_weights(self, y: np.ndarray) -> np.ndarray:
        if self.class_weight is None:
            return np.ones(len(y))
        if self.class_weight != "balanced":
            raise ConfigError(f"unsupported class_weight {self.class_weight!r}")
        counts = np.bincount(y, minlength=2)
        per_class = len(y) / (2.0 * counts)
        return per_class[y]

    # -- inference -------------------------------------------------------------
    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = self._as_batch(np.asarray(X, dtype=np.float64))
        if X.shape[2:] != self.input_shape_:
            raise ShapeError(f"expected inputs of shape {tuple(self.input_shape_)}, "
                             f"got {tuple(X.shape[2:])}")
        p1 = _sigmoid(self._forward_np(X, self.weights_))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)

    def _forward_np(self, X, params) -> np.ndarray:
        wrapped = {k: (v if isinstance(v, Variable) else Variable(v))
                   for k, v in params.items()}
        return self._logits(X, wrapped).data[:, 0]

    @staticmethod
    def _as_batch(X: np.ndarray) -> np.ndarray:
        if X.ndim == 2:
            X = X[None, :, :]
        if X.ndim == 3:
            X = X[:, None, :, :]
        if X.ndim != 4 or X.shape[1] != 1:
            raise ShapeError(f"expected (n, H, W) or (n, 1, H, W), got {X.shape}")
        return X

    def _check_fitted(self) -> None:
        if not hasattr(self, "weights_"):
            raise RuntimeError("classifier is not fitted")


def _weighted_bce(z: Variable, y: np.ndarray, w: np.ndarray) -> Variable:
    yv = y.astype(np.float64)[:, None]
    wv = (w / w.sum())[:, None]
    per = ad.add(ad.softplus(z), ad.mul(z, -yv))
    return ad.vsum(ad.mul(per, wv))


def _bce_np(z: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# -- persistence ----------------------------------------------------------------

def save_classifier(clf: ConvNetClassifier, base_path, extra: dict | None = None) -> None:
    clf._check_fitted()
    base = Path(base_path)
    save_tensors(base.with_suffix(".sglk"), clf.weights_)
    sidecar = {
        "params": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in clf.get_params().items()},
        "best_epochs": clf.best_epochs_,
        "cv_auc": clf.cv_auc_,
        "input_shape": list(clf.input_shape_),
        **(extra or {}),
    }
    base.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_classifier(base_path) -> tuple[ConvNetClassifier, dict]:
    base = Path(base_path)
    sidecar = json.loads(base.with_suffix(".json").read_text())
    params = dict(sidecar["params"])
    params["channels"] = tuple(params["channels"])
    clf = ConvNetClassifier(**params)
    clf.weights_ = load_tensors(base.with_suffix(".sglk"))
    clf.best_epochs_ = sidecar["best_epochs"]
    clf.cv_auc_ = sidecar["cv_auc"]
    clf.input_shape_ = tuple(sidecar["input_shape"])
    clf.classes_ = np.array([0, 1])
    return clf, sidecar
