"""Gaussian discriminant analysis: LDA (pooled covariance) and QDA (per class)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import SingularCovarianceError
from .base import ClassifierModel, check_training

# eigenvalue floor relative to the largest, below which a covariance counts as singular
_RCOND = 1e-10


def _class_stats(X, y, k):
    counts = np.bincount(y, minlength=k)
    if np.any(counts == 0):
        missing = np.flatnonzero(counts == 0).tolist()
        raise SingularCovarianceError(f"classes {missing} have no training samples")
    means = np.stack([X[y == c].mean(axis=0) for c in range(k)])
    return counts, means


def _checked_cholesky(S, what):
    vals = np.linalg.eigvalsh(S)
    if vals[-1] <= 0 or vals[0] <= _RCOND * vals[-1]:
        raise SingularCovarianceError(f"{what} is singular (eigenvalue ratio {vals[0] / max(vals[-1], 1e-300):.3g})")
    return linalg.cho_factor(S, lower=True)


@dataclass(frozen=True, eq=False)
class LdaModel(ClassifierModel):
    means: np.ndarray
    covariance: np.ndarray
    log_priors: np.ndarray
    coef: np.ndarray  # d x k, S^{-1} mu_c
    intercept: np.ndarray

    def decision_function(self, X):
        return X @ self.coef + self.intercept

    def _predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


def fit_lda(train_features, labels, n_classes=None) -> LdaModel:
    """Linear discriminant with pooled within-class covariance and empirical priors."""
    X, y, k = check_training(train_features, labels, n_classes)
    n, d = X.shape
    counts, means = _class_stats(X, y, k)
    if n - k < d:
        raise SingularCovarianceError(f"pooled covariance of {d} features from {n} samples in {k} classes is singular")
    R = X - means[y]
    S = R.T @ R / (n - k)
    cho = _checked_cholesky(S, "pooled within-class covariance")
    coef = linalg.cho_solve(cho, means.T)
    log_priors = np.log(counts / n)
    intercept = -0.5 * np.sum(means.T * coef, axis=0) + log_priors
    return LdaModel(k, d, means, S, log_priors, coef, intercept)


@dataclass(frozen=True, eq=False)
class QdaModel(ClassifierModel):
    means: np.ndarray
    chol: np.ndarray  # k x d x d lower Cholesky factors
    log_dets: np.ndarray
    log_priors: np.ndarray

    def decision_function(self, X):
        out = np.empty((X.shape[0], self.n_classes))
        for c in range(self.n_classes):
            z = linalg.solve_triangular(self.chol[c], (X - self.means[c]).T, lower=True)
            out[:, c] = -0.5 * np.sum(z**2, axis=0) - 0.5 * self.log_dets[c] + self.log_priors[c]
        return out

    def _predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


def fit_qda(train_features, labels, n_classes=None) -> QdaModel:
    """Quadratic discriminant; no covariance regularisation.

    Each class needs more samples than features, otherwise its covariance is
    singular and :class:`SingularCovarianceError` is raised.
    """
    X, y, k = check_training(train_features, labels, n_classes)
    n, d = X.shape
    counts, means = _class_stats(X, y, k)
    chol = np.empty((k, d, d))
    log_dets = np.empty(k)
    for c in range(k):
        if counts[c] - 1 < d:
            raise SingularCovarianceError(
                f"class {c} has {counts[c]} samples for {d} features; its covariance is singular"
            )
        R = X[y == c] - means[c]
        S = R.T @ R / (counts[c] - 1)
        L = _checked_cholesky(S, f"covariance of class {c}")[0]
        L = np.tril(L)
        chol[c] = L
        log_dets[c] = 2.0 * np.sum(np.log(np.diag(L)))
    return QdaModel(k, d, means, chol, log_dets, np.log(counts / n))
