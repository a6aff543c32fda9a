"""Unsupervised dimension reduction: PCA by thin SVD and B-spline functional PCA.

Both reducers follow a fit-on-train / transform-anything contract; fitted
models are frozen dataclasses and never change after fitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .dataset import SpectraDataset, as_matrix
from .errors import DataError


def _fix_signs(vectors):
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


# ----------------------------------------------------------------------- PCA


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    loadings: np.ndarray  # p x m, orthonormal columns
    explained_variance: np.ndarray
    total_variance: float

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]

    @property
    def explained_ratio(self) -> np.ndarray:
        return self.explained_variance / self.total_variance

    def transform(self, rows) -> np.ndarray:
        return pca_transform(self, rows)

    def to_dict(self) -> dict:
        return {
            "kind": "pca",
            "mean": self.mean.tolist(),
            "loadings": self.loadings.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "total_variance": self.total_variance,
        }


def pca_fit(train, variance_target: float | None = 0.99, n_components: int | None = None) -> PcaModel:
    """Covariance PCA of the training rows.

    With ``n_components`` given, exactly that many components are kept;
    otherwise the smallest count whose cumulative explained fraction reaches
    ``variance_target``.
    """
    X = as_matrix(train)
    n, p = X.shape
    if n < 2:
        raise DataError("PCA needs at least 2 rows")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    var = s**2 / (n - 1)
    total = float(var.sum())
    if total <= 0.0 or not np.isfinite(total):
        raise DataError("PCA on a zero-variance dataset")

    if n_components is not None:
        m = int(n_components)
        if not 1 <= m <= p:
            raise DataError(f"n_components must lie in [1, {p}], got {m}")
    else:
        if variance_target is None or not 0.0 < variance_target <= 1.0:
            raise DataError(f"variance_target must lie in (0, 1], got {variance_target}")
        cum = np.cumsum(var) / total
        m = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
        m = min(m, var.size)

    loadings = np.zeros((p, m))
    ev = np.zeros(m)
    r = min(m, vt.shape[0])
    loadings[:, :r] = vt[:r].T
    ev[:r] = var[:r]
    if m > r:
        # fixed m beyond n: complete the basis with directions of zero variance
        q, _ = np.linalg.qr(np.hstack([loadings[:, :r], np.eye(p)]))
        loadings[:, r:] = q[:, r:m]
    loadings = _fix_signs(loadings)
    return PcaModel(mean, loadings, ev, total)


def pca_transform(model: PcaModel, rows) -> np.ndarray:
    X = as_matrix(rows)
    if X.shape[1] != model.mean.size:
        raise DataError(f"rows have {X.shape[1]} features, model expects {model.mean.size}")
    return (X - model.mean) @ model.loadings


def pca_reconstruct(model: PcaModel, scores) -> np.ndarray:
    return np.asarray(scores) @ model.loadings.T + model.mean


# ---------------------------------------------------------------------- FPCA


def trapezoid_weights(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 1:
        return np.ones(1)
    d = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def bspline_knots(lo: float, hi: float, n_interior: int, order: int = 4) -> np.ndarray:
    inner = np.linspace(lo, hi, n_interior + 2)
    deg = order - 1
    return np.concatenate([np.full(deg, lo), inner, np.full(deg, hi)])


def _design(knots, order, x):
    return BSpline.design_matrix(x, knots, order - 1).toarray()


def _roughness(knots, order) -> np.ndarray:
    """Gram matrix of basis second derivatives, by 5-point Gauss-Legendre per knot span."""
    deg = order - 1
    nbasis = knots.size - order
    spline = BSpline(knots, np.eye(nbasis), deg)
    d2 = spline.derivative(2)
    gx, gw = np.polynomial.legendre.leggauss(5)
    breaks = np.unique(knots)
    R = np.zeros((nbasis, nbasis))
    for a, b in zip(breaks[:-1], breaks[1:]):
        x = 0.5 * (b - a) * gx + 0.5 * (a + b)
        vals = d2(x)
        R += (vals * (0.5 * (b - a) * gw)[:, None]).T @ vals
    return R


def _gcv_penalty(Y, B, R, log_grid) -> float:
    BtB = B.T @ B
    BtY = B.T @ Y.T
    scale = np.trace(BtB) / max(np.trace(R), 1e-300)
    n, p = Y.shape
    best, best_lam = np.inf, None
    for s in log_grid:
        lam = scale * 10.0**s
        A = BtB + lam * R
        try:
            C = np.linalg.solve(A, BtY)
            edf = np.trace(np.linalg.solve(A, BtB))
        except np.linalg.LinAlgError:
            continue
        resid = Y.T - B @ C
        denom = (1.0 - edf / p) ** 2
        if denom <= 0:
            continue
        gcv = (np.sum(resid**2) / (n * p)) / denom
        if not np.isfinite(gcv):
            continue
        if best_lam is None or gcv < best - 1e-15 * abs(best):
            best, best_lam = gcv, lam
    if best_lam is None:
        raise DataError("penalised smoothing failed for every penalty on the GCV grid")
    return best_lam


@dataclass(frozen=True, eq=False)
class FpcaModel:
    wavelengths: np.ndarray
    knots: np.ndarray
    order: int
    penalty: float
    smoother: np.ndarray  # nbasis x p: grid values -> basis coefficients
    gram: np.ndarray  # quadrature Gram matrix of the basis
    mean_coef: np.ndarray
    eigenfunctions: np.ndarray  # m x nbasis coefficient rows
    eigenvalues: np.ndarray
    quadrature: np.ndarray

    @property
    def n_scores(self) -> int:
        return self.eigenfunctions.shape[0]

    def basis_matrix(self, x=None) -> np.ndarray:
        x = self.wavelengths if x is None else np.asarray(x, float)
        return _design(self.knots, self.order, x)

    def eigenfunction_values(self, x=None) -> np.ndarray:
        """Eigenfunctions evaluated on ``x`` (default: the training grid), one per row."""
        return self.eigenfunctions @ self.basis_matrix(x).T

    def transform(self, rows) -> np.ndarray:
        return fpca_scores(self, rows)

    def to_dict(self) -> dict:
        return {
            "kind": "fpca",
            "order": self.order,
            "knots": self.knots.tolist(),
            "penalty": self.penalty,
            "mean_coef": self.mean_coef.tolist(),
            "eigenfunctions": self.eigenfunctions.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }


def fpca_fit(
    train,
    n_scores: int = 4,
    wavelengths=None,
    *,
    n_interior_knots: int = 40,
    penalty: float | None = None,
    log_penalty_grid=np.arange(-8.0, 2.01, 0.5),
) -> FpcaModel:
    """Functional PCA of spectra smoothed onto a cubic B-spline basis.

    Each training curve is fitted by penalised least squares with a
    second-derivative roughness penalty; the penalty is shared across curves
    and chosen by generalised cross-validation unless ``penalty`` is given.
    Eigenfunctions are orthonormal under the trapezoidal inner product on the
    wavelength grid. ``n_interior_knots`` is reduced when the grid is too
    short to support it.
    """
    X = as_matrix(train)
    if wavelengths is None:
        wavelengths = train.wavelengths if isinstance(train, SpectraDataset) else np.arange(X.shape[1], dtype=float)
    grid = np.asarray(wavelengths, dtype=float)
    n, p = X.shape
    if grid.size != p:
        raise DataError(f"grid has {grid.size} points, rows have {p}")
    if n < 2:
        raise DataError("FPCA needs at least 2 curves")
    order = 4
    n_int = min(int(n_interior_knots), p - order)
    if n_int < 0:
        raise DataError(f"grid of {p} points is too short for a cubic B-spline basis")
    knots = bspline_knots(grid[0], grid[-1], n_int, order)
    nbasis = knots.size - order
    if not 1 <= n_scores <= nbasis:
        raise DataError(f"n_scores must lie in [1, {nbasis}]")

    B = _design(knots, order, grid)
    q = trapezoid_weights(grid)
    W = B.T @ (q[:, None] * B)
    W = 0.5 * (W + W.T)
    try:
        L = np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        raise DataError("singular basis Gram matrix; grid too sparse for the knot layout") from None

    R = _roughness(knots, order)
    lam = _gcv_penalty(X, B, R, log_penalty_grid) if penalty is None else float(penalty)
    smoother = np.linalg.solve(B.T @ B + lam * R, B.T)

    C = X @ smoother.T
    mean_coef = C.mean(axis=0)
    Cc = C - mean_coef
    cov = Cc.T @ Cc / (n - 1)
    # covariance operator in the W-inner product: L^T cov L u = lam u, e = L^{-T} u
    M = L.T @ cov @ L
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    order_idx = np.argsort(vals)[::-1][:n_scores]
    vals = np.clip(vals[order_idx], 0.0, None)
    U = _fix_signs(vecs[:, order_idx])
    E = np.linalg.solve(L.T, U)
    return FpcaModel(grid, knots, order, lam, smoother, W, mean_coef, E.T.copy(), vals, q)


def fpca_scores(model: FpcaModel, rows) -> np.ndarray:
    """Smooth each row, subtract the mean curve and project on the eigenfunctions."""
    X = as_matrix(rows)
    if X.shape[1] != model.wavelengths.size:
        raise DataError(f"rows have {X.shape[1]} points, model grid has {model.wavelengths.size}")
    C = X @ model.smoother.T - model.mean_coef
    return C @ model.gram @ model.eigenfunctions.T


def fpca_smooth(model: FpcaModel, rows) -> np.ndarray:
    """Smoothed curves on the model grid."""
    return as_matrix(rows) @ model.smoother.T @ model.basis_matrix().T


def fpca_reconstruct(model: FpcaModel, scores) -> np.ndarray:
    """Curves on the grid rebuilt from the mean and the leading ``scores.shape[1]`` components."""
    S = np.atleast_2d(np.asarray(scores, dtype=float))
    m = S.shape[1]
    coef = model.mean_coef + S @ model.eigenfunctions[:m]
    return coef @ model.basis_matrix().T
