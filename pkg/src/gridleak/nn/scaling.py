"""Feature scalers with exact inverses, sklearn transformer style."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..errors import ShapeError

SCALER_KINDS = ("minmax", "standard")


class ValueScaler(BaseEstimator, TransformerMixin):
    """Min-max or standard scaler over a single series or per-column data.

    1-D inputs are treated as one feature; 2-D inputs are scaled
    column-wise. Degenerate features (zero range or zero spread) keep
    their offset but get a divisor of 1 so transforms never produce NaN.
    """

    def __init__(self, kind: str = "minmax"):
        self.kind = kind

    def fit(self, X, y=None):
        if self.kind not in SCALER_KINDS:
            raise ValueError(f"unknown scaler kind {self.kind!r}")
        data = np.asarray(X, dtype=np.float64)
        if data.size == 0:
            raise ValueError("cannot fit a scaler on empty data")
        if data.ndim > 2:
            raise ShapeError(f"scaler expects 1-D or 2-D data, got shape {data.shape}")
        axis = 0 if data.ndim == 2 else None
        if self.kind == "minmax":
            self.offset_ = np.atleast_1d(data.min(axis=axis))
            span = np.atleast_1d(data.max(axis=axis)) - self.offset_
        else:
            self.offset_ = np.atleast_1d(data.mean(axis=axis))
            span = np.atleast_1d(data.std(axis=axis))
        span = np.where(span > 0.0, span, 1.0)
        self.scale_ = span
        self.n_features_in_ = self.offset_.shape[0]
        return self

    def transform(self, X):
        self._check_fitted()
        data = np.asarray(X, dtype=np.float64)
        if data.ndim <= 1 and self.n_features_in_ == 1:
            return (data - self.offset_[0]) / self.scale_[0]
        return (data - self.offset_) / self.scale_

    def inverse_transform(self, X):
        self._check_fitted()
        data = np.asarray(X, dtype=np.float64)
        if data.ndim <= 1 and self.n_features_in_ == 1:
            return data * self.scale_[0] + self.offset_[0]
        return data * self.scale_ + self.offset_

    def _check_fitted(self) -> None:
        if not hasattr(self, "offset_"):
            raise RuntimeError("scaler is not fitted")

    # container round-trip -------------------------------------------------
    def to_tensors(self, prefix: str = "scaler") -> dict[str, np.ndarray]:
        self._check_fitted()
        return {
            f"{prefix}/kind": np.array([float(SCALER_KINDS.index(self.kind))]),
            f"{prefix}/offset": self.offset_,
            f"{prefix}/scale": self.scale_,
        }

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray], prefix: str = "scaler") -> "ValueScaler":
        scaler = cls(kind=SCALER_KINDS[int(tensors[f"{prefix}/kind"][0])])
        scaler.offset_ = np.asarray(tensors[f"{prefix}/offset"], dtype=np.float64)
        scaler.scale_ = np.asarray(tensors[f"{prefix}/scale"], dtype=np.float64)
        scaler.n_features_in_ = scaler.offset_.shape[0]
        return scaler


def fit_scaler(kind: str, data) -> ValueScaler:
    return ValueScaler(kind=kind).fit(data)
