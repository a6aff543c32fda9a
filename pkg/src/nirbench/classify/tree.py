"""CART classification trees (Gini) and random forests.

Tree growth runs in numba. A node holds either a split ``x[feature] <=
threshold`` (left) or a leaf class (``feature == -1``). Ties resolve to the
lowest index everywhere: candidate features are scanned in ascending order,
thresholds from low to high, and the modal class of a leaf is the smallest
index among the most frequent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .base import ClassifierModel, check_training

_LEAF = -1


_SMALL = 16


@njit(cache=True, nogil=True)
def _grow(sub, ys, k, order, sval, w, mtry, min_leaf, max_depth, randomize,
          feature, threshold, left, right, value, base):
    """Grow one tree on local samples with multiplicities ``w`` (bootstrap counts).

    ``sub`` is the d x n feature-major training block, ``order``/``sval`` its
    per-feature ascending order and sorted values. Large nodes scan the
    presorted order skipping non-members; small nodes sort their members.
    Writes nodes from position ``base`` and returns the number used.
    """
    d, n = sub.shape
    members = np.empty(n, np.int64)
    buf = np.empty(n, np.int64)
    node_of = np.full(n, -1, np.int64)
    vals = np.empty(n)
    labs = np.empty(n, np.int64)
    wts = np.empty(n)
    counts = np.zeros(k)
    lcounts = np.zeros(k)
    feats = np.arange(d)
    cand = np.empty(d, np.int64)

    m0 = 0
    for i in range(n):
        if w[i] > 0:
            members[m0] = i
            node_of[i] = base
            m0 += 1

    st_node = np.empty(n + 1, np.int64)
    st_lo = np.empty(n + 1, np.int64)
    st_hi = np.empty(n + 1, np.int64)
    st_depth = np.empty(n + 1, np.int64)
    st_node[0] = base
    st_lo[0] = 0
    st_hi[0] = m0
    st_depth[0] = 0
    top = 1
    used = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        lo = st_lo[top]
        hi = st_hi[top]
        depth = st_depth[top]
        mu = hi - lo

        counts[:] = 0
        for t in range(lo, hi):
            i = members[t]
            counts[ys[i]] += w[i]
        m = 0.0
        modal = 0
        for c in range(k):
            m += counts[c]
            if counts[c] > counts[modal]:
                modal = c
        value[node] = modal
        feature[node] = _LEAF
        threshold[node] = 0.0
        left[node] = -1
        right[node] = -1
        if counts[modal] == m or m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        if randomize:
            # partial Fisher-Yates draw of mtry features, kept in ascending order
            for j in range(mtry):
                r = j + np.random.randint(0, d - j)
                tmp = feats[j]
                feats[j] = feats[r]
                feats[r] = tmp
            for j in range(mtry):
                fv = feats[j]
                q = j - 1
                while q >= 0 and cand[q] > fv:
                    cand[q + 1] = cand[q]
                    q -= 1
                cand[q + 1] = fv
            ncand = mtry
        else:
            for j in range(d):
                cand[j] = j
            ncand = d

        sq_total = 0.0
        for c in range(k):
            sq_total += counts[c] * counts[c]
        best = -1.0
        best_f = -1
        best_t = 0.0
        for jj in range(ncand):
            f = cand[jj]
            lcounts[:] = 0
            sq_l = 0.0
            sq_r = sq_total
            nl = 0.0
            if mu <= _SMALL:
                row = sub[f]
                for t in range(mu):
                    i = members[lo + t]
                    v = row[i]
                    lb = ys[i]
                    wt = w[i]
                    q = t - 1
                    while q >= 0 and vals[q] > v:
                        vals[q + 1] = vals[q]
                        labs[q + 1] = labs[q]
                        wts[q + 1] = wts[q]
                        q -= 1
                    vals[q + 1] = v
                    labs[q + 1] = lb
                    wts[q + 1] = wt
                for t in range(mu - 1):
                    c = labs[t]
                    wt = wts[t]
                    sq_l += wt * (2.0 * lcounts[c] + wt)
                    sq_r -= wt * (2.0 * (counts[c] - lcounts[c]) - wt)
                    lcounts[c] += wt
                    nl += wt
                    v0 = vals[t]
                    v1 = vals[t + 1]
                    if not v0 < v1:
                        continue
                    nr = m - nl
                    if nl < min_leaf or nr < min_leaf:
                        continue
                    # minimising weighted Gini == maximising sum_c n_c^2 / n per side
                    score = sq_l / nl + sq_r / nr
                    if score > best + 1e-10:
                        best = score
                        best_f = f
                        tt = 0.5 * (v0 + v1)
                        if not tt < v1:
                            tt = v0
                        best_t = tt
            else:
                ordf = order[f]
                svf = sval[f]
                prev = 0.0
                seen = False
                for pos in range(n):
                    i = ordf[pos]
                    if node_of[i] != node:
                        continue
                    v = svf[pos]
                    if seen and prev < v:
                        nr = m - nl
                        if nl >= min_leaf and nr >= min_leaf:
                            score = sq_l / nl + sq_r / nr
                            if score > best + 1e-10:
                                best = score
                                best_f = f
                                tt = 0.5 * (prev + v)
                                if not tt < v:
                                    tt = prev
                                best_t = tt
                    c = ys[i]
                    wt = w[i]
                    sq_l += wt * (2.0 * lcounts[c] + wt)
                    sq_r -= wt * (2.0 * (counts[c] - lcounts[c]) - wt)
                    lcounts[c] += wt
                    nl += wt
                    prev = v
                    seen = True
        if best_f < 0:
            continue

        lnode = base + used
        rnode = base + used + 1
        used += 2
        row = sub[best_f]
        nleft = 0
        for t in range(lo, hi):
            i = members[t]
            if row[i] <= best_t:
                buf[nleft] = i
                node_of[i] = lnode
                nleft += 1
        nright = 0
        for t in range(lo, hi):
            i = members[t]
            if not row[i] <= best_t:
                buf[nleft + nright] = i
                node_of[i] = rnode
                nright += 1
        for t in range(mu):
            members[lo + t] = buf[t]

        feature[node] = best_f
        threshold[node] = best_t
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is grown first
        st_node[top] = rnode
        st_lo[top] = lo + nleft
        st_hi[top] = hi
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_lo[top] = lo
        st_hi[top] = lo + nleft
        st_depth[top] = depth + 1
        top += 1
    return used


@njit(cache=True, nogil=True)
def _fit_forest(XT, y, k, train_idx, n_trees, mtry, min_leaf, max_depth, bootstrap, randomize, seed):
    np.random.seed(seed)
    n = train_idx.size
    d = XT.shape[0]
    sub = np.empty((d, n))
    for f in range(d):
        for i in range(n):
            sub[f, i] = XT[f, train_idx[i]]
    ys = np.empty(n, np.int64)
    for i in range(n):
        ys[i] = y[train_idx[i]]
    order = np.empty((d, n), np.int64)
    sval = np.empty((d, n))
    for f in range(d):
        o = np.argsort(sub[f], kind="mergesort")
        order[f] = o
        sval[f] = sub[f][o]

    cap = 2 * n + 1
    total = n_trees * cap
    feature = np.empty(total, np.int64)
    threshold = np.empty(total)
    left = np.empty(total, np.int64)
    right = np.empty(total, np.int64)
    value = np.empty(total, np.int64)
    roots = np.empty(n_trees, np.int64)
    pos = 0
    w = np.empty(n)
    for t in range(n_trees):
        if bootstrap:
            w[:] = 0
            for i in range(n):
                w[np.random.randint(0, n)] += 1
        else:
            w[:] = 1
        roots[t] = pos
        pos += _grow(sub, ys, k, order, sval, w, mtry, min_leaf, max_depth, randomize,
                     feature, threshold, left, right, value, pos)
    return feature[:pos].copy(), threshold[:pos].copy(), left[:pos].copy(), right[:pos].copy(), value[:pos].copy(), roots


@njit(cache=True, nogil=True)
def _vote(feature, threshold, left, right, value, roots, X, rows, k):
    out = np.empty(rows.size, np.int64)
    votes = np.zeros(k, np.int64)
    for r in range(rows.size):
        x = X[rows[r]]
        votes[:] = 0
        for t in range(roots.size):
            node = roots[t]
            while feature[node] >= 0:
                if x[feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            votes[value[node]] += 1
        best = 0
        for c in range(1, k):
            if votes[c] > votes[best]:
                best = c
        out[r] = best
    return out


@njit(cache=True, nogil=True)
def forest_cv_accuracy(X, y, k, folds, n_folds, n_trees, mtry, seed):
    """Mean per-fold accuracy of a random forest over precomputed fold ids."""
    XT = np.ascontiguousarray(X.T)
    acc = 0.0
    for f in range(n_folds):
        tr = np.flatnonzero(folds != f)
        te = np.flatnonzero(folds == f)
        fe, th, le, ri, va, ro = _fit_forest(XT, y, k, tr, n_trees, mtry, 1, -1, True, True, seed + f)
        pred = _vote(fe, th, le, ri, va, ro, X, te, k)
        hit = 0
        for i in range(te.size):
            if pred[i] == y[te[i]]:
                hit += 1
        acc += hit / te.size
    return acc / n_folds


@dataclass(frozen=True, eq=False)
class TreeModel(ClassifierModel):
    """One or more trees stored in flat arrays; ``roots`` marks each tree."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray

    @property
    def n_trees(self) -> int:
        return self.roots.size

    def depth(self, tree: int = 0) -> int:
        stack = [(int(self.roots[tree]), 0)]
        deepest = 0
        while stack:
            node, d = stack.pop()
            deepest = max(deepest, d)
            if self.feature[node] >= 0:
                stack += [(int(self.left[node]), d + 1), (int(self.right[node]), d + 1)]
        return deepest

    def _predict(self, X):
        X = np.ascontiguousarray(X)
        return _vote(self.feature, self.threshold, self.left, self.right, self.value,
                     self.roots, X, np.arange(X.shape[0]), self.n_classes)


def fit_tree(train_features, labels, min_leaf: int = 5, max_depth: int | None = None, n_classes=None) -> TreeModel:
    """Unpruned CART tree on exhaustive midpoint splits minimising weighted Gini."""
    X, y, k = check_training(train_features, labels, n_classes)
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    md = -1 if max_depth is None else int(max_depth)
    arrays = _fit_forest(np.ascontiguousarray(X.T), y, k, np.arange(X.shape[0]), 1, X.shape[1],
                         int(min_leaf), md, False, False, 0)
    return TreeModel(k, X.shape[1], *arrays)


def fit_rf(
    train_features,
    labels,
    n_trees: int = 500,
    mtry: int | None = None,
    seed: int = 0,
    *,
    bootstrap: bool = True,
    min_leaf: int = 1,
    n_classes=None,
) -> TreeModel:
    """Random forest of Gini trees; each split searches ``mtry`` fresh random features.

    Defaults: ``mtry = ceil(sqrt(d))``, fully grown trees (``min_leaf=1``).
    Votes are tallied per tree; a tied vote goes to the lowest class index.
    """
    X, y, k = check_training(train_features, labels, n_classes)
    d = X.shape[1]
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    mtry = int(math.ceil(math.sqrt(d))) if mtry is None else int(mtry)
    if not 1 <= mtry <= d:
        raise ValueError(f"mtry must lie in [1, {d}]")
    arrays = _fit_forest(np.ascontiguousarray(X.T), y, k, np.arange(X.shape[0]), int(n_trees), mtry,
                         int(min_leaf), -1, bool(bootstrap), mtry < d, int(seed) % (2**32))
    return TreeModel(k, d, *arrays)
