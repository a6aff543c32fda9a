"""PLS-DA: NIPALS PLS2 regression on a one-hot class indicator, argmax decoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .base import ClassifierModel, check_training


@dataclass(frozen=True, eq=False)
class PlsModel(ClassifierModel):
    x_mean: np.ndarray
    y_mean: np.ndarray
    coef: np.ndarray  # d x k
    weights: np.ndarray  # W, d x a
    x_loadings: np.ndarray  # P, d x a
    y_loadings: np.ndarray  # Q, k x a
    x_scores: np.ndarray  # T, n x a (training)

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]

    def decision_function(self, X):
        return (X - self.x_mean) @ self.coef + self.y_mean

    def _predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


def nipals_pls2(X, Y, n_components):
    """PLS2 with NIPALS deflation on centred X (n x d) and Y (n x m).

    Each weight vector is the fixed point of the NIPALS inner loop, the
    leading left singular vector of X'Y, taken directly from a thin SVD so
    near-tied singular values cannot stall a power iteration. Once Y is
    exhausted the weights follow the leading direction of the remaining X.
    Signs make the largest-magnitude weight entry positive. Returns W, P,
    Q, T with one column per component.
    """
    X = X.copy()
    Y = Y.copy()
    n, d = X.shape
    m = Y.shape[1]
    W = np.zeros((d, n_components))
    P = np.zeros((d, n_components))
    Q = np.zeros((m, n_components))
    T = np.zeros((n, n_components))
    for a in range(n_components):
        C = X.T @ Y
        if np.linalg.norm(C) > 1e-12 * max(np.linalg.norm(X), 1e-300) * max(np.linalg.norm(Y), 1.0):
            w = np.linalg.svd(C, full_matrices=False)[0][:, 0]
        else:
            w = np.linalg.svd(X, full_matrices=False)[2][0]
        w = w * np.sign(w[np.argmax(np.abs(w))])
        t = X @ w
        tt = t @ t
        if tt <= 1e-300:
            raise DataError(f"X has no variance left at component {a + 1}")
        q = Y.T @ t / tt
        p = X.T @ t / tt
        X -= np.outer(t, p)
        Y -= np.outer(t, q)
        W[:, a], P[:, a], Q[:, a], T[:, a] = w, p, q, t
    return W, P, Q, T


def fit_plsda(train_features, labels, n_components: int, n_classes=None) -> PlsModel:
    X, y, k = check_training(train_features, labels, n_classes)
    n, d = X.shape
    if not 1 <= n_components <= min(n - 1, d):
        raise ValueError(f"n_components must lie in [1, {min(n - 1, d)}], got {n_components}")
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    if not np.any(Xc):
        raise DataError("PLS on zero-variance features")
    Y = np.eye(k)[y]
    y_mean = Y.mean(axis=0)
    W, P, Q, T = nipals_pls2(Xc, Y - y_mean, n_components)
    coef = W @ np.linalg.solve(P.T @ W, Q.T)
    return PlsModel(k, d, x_mean, y_mean, coef, W, P, Q, T)
