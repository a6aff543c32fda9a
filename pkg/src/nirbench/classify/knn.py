"""k-nearest-neighbour majority vote in Euclidean distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import ClassifierModel, check_training


@dataclass(frozen=True, eq=False)
class KnnModel(ClassifierModel):
    train_features: np.ndarray
    train_labels: np.ndarray
    k_neighbors: int

    def _predict(self, X):
        n, d = self.train_features.shape
        chunk = max(1, 4_000_000 // max(n * d, 1))
        out = np.empty(X.shape[0], dtype=np.int64)
        for start in range(0, X.shape[0], chunk):
            out[start : start + chunk] = self._predict_block(X[start : start + chunk])
        return out

    def _predict_block(self, Q):
        diff = Q[:, None, :] - self.train_features[None, :, :]
        dist = np.einsum("qnd,qnd->qn", diff, diff)
        # stable sort: equal distances keep training order, lower index first
        nearest = np.argsort(dist, axis=1, kind="stable")[:, : self.k_neighbors]
        labs = self.train_labels[nearest]
        out = np.empty(Q.shape[0], dtype=np.int64)
        for r, row in enumerate(labs):
            votes = np.bincount(row, minlength=self.n_classes)
            tied = votes == votes.max()
            # vote ties go to the class of the nearest neighbour among the tied classes
            out[r] = next(c for c in row if tied[c])
        return out


def fit_knn(train_features, labels, k_neighbors: int = 1, n_classes=None) -> KnnModel:
    X, y, k = check_training(train_features, labels, n_classes)
    if not 1 <= k_neighbors <= X.shape[0]:
        raise ValueError(f"k_neighbors must lie in [1, {X.shape[0]}], got {k_neighbors}")
    return KnnModel(k, X.shape[1], X.copy(), y.copy(), int(k_neighbors))
