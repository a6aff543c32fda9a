"""Uniform fit/predict contract shared by every classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


def check_training(X, labels, n_classes=None):
    """Validate a training pair; returns (X float 2-D, y int, k)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2:
        raise DataError(f"training features must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise DataError(f"{X.shape[0]} rows but {y.size} labels")
    if X.shape[0] == 0:
        raise DataError("empty training set")
    if y.min() < 0:
        raise DataError("labels must be non-negative class indices")
    if not np.all(np.isfinite(X)):
        raise DataError("training features contain non-finite values")
    k = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if y.max() >= k:
        raise DataError(f"label {y.max()} out of range for {k} classes")
    return X, y, k


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """A fitted classifier. Subclasses implement ``_predict`` on validated rows."""

    n_classes: int
    n_features: int

    def predict(self, rows) -> np.ndarray:
        X = np.asarray(rows, dtype=float)
        if X.size == 0:
            return np.zeros(0, dtype=np.int64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DataError(f"rows have shape {X.shape}, model expects {self.n_features} features")
        return np.asarray(self._predict(X), dtype=np.int64)

    def _predict(self, X):
        raise NotImplementedError

    def to_dict(self) -> dict:
        out = {"kind": type(self).__name__}
        for name, value in self.__dict__.items():
            out[name] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


def predict(model: ClassifierModel, rows) -> np.ndarray:
    """Labels in ``[0, k)`` for each row; pure and deterministic."""
    return model.predict(rows)
