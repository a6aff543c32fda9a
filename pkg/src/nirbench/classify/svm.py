"""Soft-margin kernel SVM solved by SMO, with one-vs-one multiclass voting.

The binary solver works on the dual

    min_a  1/2 a' Q a - sum(a)   s.t.  0 <= a_i <= C,  y' a = 0,

with Q_ij = y_i y_j K(x_i, x_j), selecting working pairs by the
second-order rule and stopping when the maximal KKT violation
m(a) - M(a) falls below ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import ConvergenceError, DataError
from .base import ClassifierModel, check_training

TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel exp(-gamma * ||x - x'||^2)."""

    gamma: float
    kind: str = "gaussian"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"kernel bandwidth must be positive, got {self.gamma}")

    def __call__(self, A, B) -> np.ndarray:
        return np.exp(-self.gamma * sq_distances(A, B))


def sq_distances(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d = np.sum(A**2, axis=1)[:, None] + np.sum(B**2, axis=1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def kernel_bandwidth(train_features, max_pairs: int = 5000, seed: int = 0) -> KernelSpec:
    """gamma = 1 / median squared pairwise distance (on at most ``max_pairs`` pairs)."""
    X = np.asarray(train_features, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise DataError("bandwidth estimate needs at least 2 points")
    n_pairs = n * (n - 1) // 2
    if n_pairs <= max_pairs:
        i, j = np.triu_indices(n, 1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=max_pairs)
        j = (i + rng.integers(1, n, size=max_pairs)) % n
    d2 = np.sum((X[i] - X[j]) ** 2, axis=1)
    med = float(np.median(d2))
    if not med > 0:
        raise DataError("median squared distance is zero; points are (mostly) identical")
    return KernelSpec(1.0 / med)


@njit(cache=True)
def _smo(K, y, C, tol, max_iter):
    n = y.size
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    gap = np.inf
    while it < max_iter:
        # i: maximal violator in I_up
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        gmax2 = -np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                v = y[t] * G[t]
                if v > gmax2:
                    gmax2 = v
                if i >= 0:
                    diff = gmax + v
                    if diff > 0:
                        quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if quad <= 0:
                            quad = TAU
                        obj = -(diff * diff) / quad
                        if obj <= best:
                            best = obj
                            j = t
        gap = gmax + gmax2
        if gap < tol or i < 0 or j < 0:
            return alpha, G, it, gap
        it += 1

        ai = alpha[i]
        aj = alpha[j]
        Qij = y[i] * y[j] * K[i, j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] + 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = ai + aj
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s
        dai = alpha[i] - ai
        daj = alpha[j] - aj
        for t in range(n):
            G[t] += y[t] * (y[i] * K[i, t] * dai + y[j] * K[j, t] * daj)
    return alpha, G, it, gap


def _rho(alpha, G, y, C):
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(np.mean(yG[free]))
    up = ((y > 0) & (alpha >= C)) | ((y < 0) & (alpha <= 0))
    low = ((y > 0) & (alpha <= 0)) | ((y < 0) & (alpha >= C))
    ub = np.min(yG[up]) if np.any(up) else np.inf
    lb = np.max(yG[low]) if np.any(low) else -np.inf
    return float(0.5 * (ub + lb))


@dataclass(frozen=True, eq=False)
class BinarySvm:
    alpha: np.ndarray
    gradient: np.ndarray
    rho: float
    iterations: int
    kkt_gap: float

    def dual_objective(self, K, y) -> float:
        ay = self.alpha * y
        return 0.5 * ay @ K @ ay - self.alpha.sum()


def solve_binary(K, y, cost: float, tol: float = 1e-3, max_iter: int | None = None) -> BinarySvm:
    """SMO on a precomputed kernel matrix with labels in {-1, +1}."""
    K = np.ascontiguousarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    if max_iter is None:
        max_iter = max(1_000_000, 100 * n)
    alpha, G, it, gap = _smo(K, y, float(cost), float(tol), int(max_iter))
    if it >= max_iter and gap >= tol:
        raise ConvergenceError(f"SMO stopped at the iteration cap {max_iter} (KKT gap {gap:.3g})", max_iter)
    alpha = np.clip(alpha, 0.0, cost)
    return BinarySvm(alpha, G, _rho(alpha, G, y, cost), int(it), float(gap))


@dataclass(frozen=True, eq=False)
class SvmModel(ClassifierModel):
    kernel: KernelSpec
    cost: float
    pairs: list  # (class_a, class_b, support indices, alpha*y on supports, rho)
    support_vectors: np.ndarray  # rows referenced by the pair support indices
    support_indices: np.ndarray  # positions of those rows in the training set

    def decision_values(self, X):
        Kx = self.kernel(X, self.support_vectors)
        return [Kx[:, sv] @ coef - rho for _, _, sv, coef, rho in self.pairs]

    def _predict(self, X):
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for (a, b, *_), dv in zip(self.pairs, self.decision_values(X)):
            winner = np.where(dv > 0, a, b)
            np.add.at(votes, (rows, winner), 1)
        return np.argmax(votes, axis=1)

    def to_dict(self) -> dict:
        return {
            "kind": "SvmModel",
            "gamma": self.kernel.gamma,
            "cost": self.cost,
            "support_indices": self.support_indices.tolist(),
            "pairs": [
                {"classes": [int(a), int(b)], "support": sv.tolist(), "dual_coef": coef.tolist(), "rho": rho}
                for a, b, sv, coef, rho in self.pairs
            ],
        }


def fit_svm(train_features, labels, cost: float = 1.0, kernel: KernelSpec | None = None,
            tol: float = 1e-3, n_classes=None) -> SvmModel:
    """One-vs-one Gaussian-kernel SVM; ``kernel`` defaults to :func:`kernel_bandwidth`."""
    X, y, k = check_training(train_features, labels, n_classes)
    if not cost > 0:
        raise ValueError("cost must be positive")
    counts = np.bincount(y, minlength=k)
    if np.any(counts == 0):
        raise DataError(f"classes {np.flatnonzero(counts == 0).tolist()} are absent from the training set")
    kernel = kernel_bandwidth(X) if kernel is None else kernel
    K = kernel(X, X)
    pairs = []
    used = set()
    for a in range(k):
        for b in range(a + 1, k):
            idx = np.flatnonzero((y == a) | (y == b))
            yy = np.where(y[idx] == a, 1.0, -1.0)
            sol = solve_binary(K[np.ix_(idx, idx)], yy, cost, tol)
            sv = sol.alpha > 0
            pairs.append((a, b, idx[sv], sol.alpha[sv] * yy[sv], sol.rho))
            used.update(idx[sv].tolist())
    # re-index supports into a compact support-vector block
    keep = np.array(sorted(used), dtype=np.int64)
    remap = {int(g): i for i, g in enumerate(keep)}
    pairs = [(a, b, np.array([remap[int(g)] for g in sv], dtype=np.int64), coef, rho) for a, b, sv, coef, rho in pairs]
    return SvmModel(k, X.shape[1], kernel, float(cost), pairs, X[keep].copy(), keep)
