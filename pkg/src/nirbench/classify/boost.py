"""One-vs-rest LogitBoost with weighted regression stumps as weak learners.

Each class gets a binary additive model F_c fitted by Newton steps on the
binomial log-likelihood, p = 1 / (1 + exp(-2F)). A step is halved until the
training negative log-likelihood does not increase, so the per-class loss
trace is monotone. Prediction is the argmax of F_c over classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .base import ClassifierModel, check_training

Z_MAX = 4.0
W_MIN = 1e-12


def _nll(F, ypm):
    # sum log(1 + exp(-2 y F)) for y in {-1, +1}
    return float(np.sum(np.logaddexp(0.0, -2.0 * ypm * F)))


def _fit_stump(order_vals, order, z, w, features):
    """Weighted least-squares stump over the presorted columns in ``features``.

    Returns (feature, threshold, left_value, right_value); feature -1 means a
    constant fit. Ties go to the lowest feature index, then the lowest threshold.
    """
    n = z.size
    tw = w.sum()
    twz = np.dot(w, z)
    if features.size == 0 or n < 2:
        return -1, 0.0, twz / tw, twz / tw
    o = order[:, features]
    W = w[o]
    WZ = (w * z)[o]
    cw = np.cumsum(W, axis=0)[:-1]
    cwz = np.cumsum(WZ, axis=0)[:-1]
    rw = tw - cw
    rwz = twz - cwz
    V = order_vals[:, features]
    valid = (V[1:] > V[:-1]) & (cw > 0) & (rw > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(valid, cwz**2 / cw + rwz**2 / rw, -np.inf)
    pos = np.argmax(gain, axis=0)
    best_per_f = gain[pos, np.arange(features.size)]
    j = int(np.argmax(best_per_f))
    if not np.isfinite(best_per_f[j]):
        return -1, 0.0, twz / tw, twz / tw
    i = pos[j]
    thr = 0.5 * (V[i, j] + V[i + 1, j])
    if not thr < V[i + 1, j]:
        thr = V[i, j]
    return int(features[j]), float(thr), float(cwz[i, j] / cw[i, j]), float(rwz[i, j] / rw[i, j])


def _stump_eval(X, f, thr, a, b):
    if f < 0:
        return np.full(X.shape[0], a)
    return np.where(X[:, f] <= thr, a, b)


def wilcoxon_scores(X, member) -> np.ndarray:
    """|rank-sum - null mean| per feature for the two-sample split ``member`` vs rest."""
    ranks = rankdata(X, axis=0)
    n1 = member.sum()
    n0 = member.size - n1
    stat = ranks[member].sum(axis=0) - n1 * (n1 + 1) / 2.0
    return np.abs(stat - n1 * n0 / 2.0)


@dataclass(frozen=True, eq=False)
class LogitBoostModel(ClassifierModel):
    stump_feature: np.ndarray  # k x T, -1 marks constant or unused slots
    stump_threshold: np.ndarray
    stump_left: np.ndarray
    stump_right: np.ndarray
    n_used: np.ndarray  # iterations actually fitted per class
    nll_trace: list = field(repr=False)  # per class, training NLL after 0..n_used steps

    @property
    def n_iter(self) -> int:
        return self.stump_feature.shape[1]

    def decision_function(self, X, n_iter=None):
        T = self.n_iter if n_iter is None else min(int(n_iter), self.n_iter)
        out = np.zeros((X.shape[0], self.n_classes))
        for c in range(self.n_classes):
            for t in range(min(T, int(self.n_used[c]))):
                out[:, c] += _stump_eval(X, self.stump_feature[c, t], self.stump_threshold[c, t],
                                         self.stump_left[c, t], self.stump_right[c, t])
        return out

    def _predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def staged_predict(self, rows, n_iter: int) -> np.ndarray:
        """Predictions of the model truncated to its first ``n_iter`` iterations."""
        X = np.atleast_2d(np.asarray(rows, dtype=float))
        if X.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        return np.argmax(self.decision_function(X, n_iter), axis=1)

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["nll_trace"] = [list(map(float, t)) for t in self.nll_trace]
        return d


def fit_logitboost(
    train_features,
    labels,
    n_iter: int = 100,
    *,
    prescreen: int | None = None,
    n_classes=None,
) -> LogitBoostModel:
    """Fit ``n_iter`` boosting rounds per class.

    ``prescreen`` restricts each class's stumps to the features with the
    largest Wilcoxon rank-sum separation of that class from the rest.
    A class stops early when its weights vanish or no step lowers its loss.
    """
    X, y, k = check_training(train_features, labels, n_classes)
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    n, d = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    order_vals = np.take_along_axis(X, order, axis=0)

    shape = (k, n_iter)
    feat = np.full(shape, -1, dtype=np.int64)
    thr = np.zeros(shape)
    lv = np.zeros(shape)
    rv = np.zeros(shape)
    n_used = np.zeros(k, dtype=np.int64)
    traces = []
    for c in range(k):
        member = y == c
        ypm = np.where(member, 1.0, -1.0)
        ystar = member.astype(float)
        if prescreen is not None and prescreen < d:
            sc = wilcoxon_scores(X, member)
            features = np.sort(np.argsort(-sc, kind="stable")[:prescreen])
        else:
            features = np.arange(d)
        F = np.zeros(n)
        loss = _nll(F, ypm)
        trace = [loss]
        for t in range(n_iter):
            p = 1.0 / (1.0 + np.exp(-2.0 * F))
            w = p * (1.0 - p)
            if w.sum() < W_MIN * n:
                break
            w = np.maximum(w, W_MIN)
            z = np.clip((ystar - p) / w, -Z_MAX, Z_MAX)
            f, th, a, b = _fit_stump(order_vals, order, z, w, features)
            step = 0.5
            accepted = False
            for _ in range(40):
                F_new = F + step * _stump_eval(X, f, th, a, b)
                new_loss = _nll(F_new, ypm)
                if new_loss <= loss:
                    accepted = True
                    break
                step *= 0.5
            if not accepted or new_loss == loss:
                break
            F, loss = F_new, new_loss
            feat[c, t], thr[c, t], lv[c, t], rv[c, t] = f, th, step * a, step * b
            n_used[c] = t + 1
            trace.append(loss)
        traces.append(np.array(trace))
    return LogitBoostModel(k, d, feat, thr, lv, rv, n_used, traces)
