import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nirbench.dataset import synth_spectra
from nirbench.errors import DataError
from nirbench.reduce import (
    bspline_knots,
    fpca_fit,
    fpca_reconstruct,
    fpca_scores,
    pca_fit,
    pca_reconstruct,
    pca_transform,
    trapezoid_weights,
)

# ----------------------------------------------------------------------- PCA


def test_pca_line_points():
    t = np.linspace(-1, 1, 9)
    m = pca_fit(np.column_stack([t, t]), n_components=2)
    assert np.allclose(np.abs(m.loadings[:, 0]), [2**-0.5, 2**-0.5])
    assert m.explained_variance[1] == pytest.approx(0.0, abs=1e-12)


def test_pca_total_variance_matches_direct():
    X = np.random.default_rng(0).normal(size=(50, 20))
    m = pca_fit(X, n_components=20)
    direct = np.sum(np.var(X, axis=0, ddof=1))
    assert m.explained_variance.sum() == pytest.approx(direct, rel=1e-10)
    assert m.total_variance == pytest.approx(direct, rel=1e-10)


def test_pca_variance_target_picks_smallest_count():
    X = np.random.default_rng(1).normal(size=(30, 8)) * np.array([10, 5, 3, 1, 0.5, 0.2, 0.1, 0.05])
    m = pca_fit(X, variance_target=0.9)
    ratio = np.cumsum(pca_fit(X, n_components=8).explained_ratio)
    expected = int(np.argmax(ratio >= 0.9)) + 1
    assert m.n_components == expected
    assert pca_fit(X, variance_target=1.0).n_components == 8


def test_pca_training_scores_uncorrelated():
    X = np.random.default_rng(2).normal(size=(40, 12))
    m = pca_fit(X, n_components=6)
    S = pca_transform(m, X)
    C = np.cov(S, rowvar=False)
    off = C - np.diag(np.diag(C))
    assert np.max(np.abs(off)) < 1e-8 * m.total_variance
    assert np.allclose(np.diag(C), m.explained_variance)


def test_pca_mean_maps_to_zero_and_shift_equivariance():
    X = np.random.default_rng(3).normal(size=(20, 5))
    m = pca_fit(X, n_components=3)
    assert np.allclose(pca_transform(m, m.mean[None, :]), 0.0)
    c = np.arange(5.0)
    assert np.allclose(pca_transform(m, X + c), pca_transform(m, X) + c @ m.loadings)


def test_pca_sign_convention():
    X = np.random.default_rng(4).normal(size=(15, 6))
    L = pca_fit(X, n_components=6).loadings
    idx = np.argmax(np.abs(L), axis=0)
    assert np.all(L[idx, np.arange(6)] > 0)


def test_pca_reconstruction_error_monotone_and_zero_at_rank():
    X = np.random.default_rng(5).normal(size=(12, 30))
    errs = []
    for m in range(1, 13):
        model = pca_fit(X, n_components=m)
        errs.append(np.sum((pca_reconstruct(model, model.transform(X)) - X) ** 2))
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
    assert errs[10] < 1e-16 * np.sum(X**2) + 1e-18  # rank of the centred matrix is n - 1 = 11


def test_pca_components_beyond_rank_are_orthonormal():
    X = np.random.default_rng(6).normal(size=(5, 10))
    m = pca_fit(X, n_components=8)
    assert np.allclose(m.loadings.T @ m.loadings, np.eye(8), atol=1e-8)
    assert np.allclose(m.explained_variance[4:], 0.0)


def test_pca_errors():
    with pytest.raises(DataError):
        pca_fit(np.ones((5, 3)))
    with pytest.raises(DataError):
        pca_fit(np.ones((1, 3)))
    m = pca_fit(np.random.default_rng(0).normal(size=(6, 3)))
    with pytest.raises(DataError):
        pca_transform(m, np.zeros((2, 4)))
    with pytest.raises(DataError):
        pca_fit(np.random.default_rng(0).normal(size=(6, 3)), n_components=4)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(3, 25), p=st.integers(2, 15), seed=st.integers(0, 10_000))
def test_pca_properties(n, p, seed):
    X = np.random.default_rng(seed).normal(size=(n, p)) * np.random.default_rng(seed + 1).uniform(0.1, 3, p)
    m = pca_fit(X, n_components=p)
    assert np.allclose(m.loadings.T @ m.loadings, np.eye(p), atol=1e-8)
    assert np.all(np.diff(m.explained_variance) <= 1e-12 * m.total_variance)
    assert np.allclose(pca_reconstruct(m, m.transform(X)), X, atol=1e-8)


# ---------------------------------------------------------------------- FPCA


def _curves(n=30, p=120, seed=0):
    return synth_spectra(n // 3, p, 3, [30, 60, 90], 0.01, seed=seed)


def test_trapezoid_weights():
    g = np.array([0.0, 1.0, 3.0])
    w = trapezoid_weights(g)
    assert np.allclose(w, [0.5, 1.5, 1.0])
    assert np.dot(w, g**0 * 1) == pytest.approx(3.0)
    assert np.dot(trapezoid_weights(np.linspace(0, 1, 101)), np.linspace(0, 1, 101)) == pytest.approx(0.5)


def test_knot_vector_layout():
    k = bspline_knots(0.0, 1.0, 3, order=4)
    assert k.size == 3 + 2 + 2 * 3
    assert np.all(k[:4] == 0.0) and np.all(k[-4:] == 1.0)


def test_fpca_eigenfunctions_orthonormal_and_sorted():
    ds = _curves()
    m = fpca_fit(ds, n_scores=4)
    G = m.eigenfunctions @ m.gram @ m.eigenfunctions.T
    assert np.allclose(G, np.eye(4), atol=1e-6)
    vals = m.eigenfunction_values()
    assert np.allclose(vals @ (m.quadrature[:, None] * vals.T), np.eye(4), atol=1e-6)
    assert np.all(np.diff(m.eigenvalues) <= 1e-12)


def test_fpca_matches_grid_covariance_operator():
    # oracle: eigen-decompose the quadrature-weighted covariance of the smoothed curves on the grid
    ds = _curves(seed=1)
    m = fpca_fit(ds, n_scores=5)
    B = m.basis_matrix()
    smooth = ds.absorbances @ m.smoother.T @ B.T
    Sc = smooth - smooth.mean(axis=0)
    cov = Sc.T @ Sc / (ds.n - 1)
    r = np.sqrt(m.quadrature)
    vals = np.linalg.eigvalsh(r[:, None] * cov * r[None, :])[::-1][:5]
    assert np.allclose(m.eigenvalues, vals, rtol=1e-8, atol=1e-12 * vals[0])


def test_fpca_training_scores_diagonal_covariance():
    ds = _curves(seed=2)
    m = fpca_fit(ds, n_scores=4)
    S = fpca_scores(m, ds)
    C = np.cov(S, rowvar=False)
    assert np.max(np.abs(C - np.diag(np.diag(C)))) < 1e-6 * C[0, 0]
    assert np.allclose(np.diag(C), m.eigenvalues, rtol=1e-6)


def test_fpca_mean_curve_scores_zero():
    ds = _curves(seed=3)
    m = fpca_fit(ds, n_scores=4)
    assert np.max(np.abs(fpca_scores(m, ds.absorbances.mean(axis=0)[None, :]))) < 1e-6


def test_fpca_identical_curves_zero_spectrum():
    row = np.sin(np.linspace(0, 3, 80))
    X = np.tile(row, (6, 1))
    m = fpca_fit(X, n_scores=3, wavelengths=np.linspace(1000, 1158, 80))
    assert np.allclose(m.eigenvalues, 0.0, atol=1e-20)
    assert np.allclose(fpca_scores(m, X), 0.0, atol=1e-10)


def test_fpca_single_basis_direction_recovered():
    grid = np.linspace(0.0, 1.0, 101)
    base = fpca_fit(np.random.default_rng(0).normal(size=(4, 101)), n_scores=1, wavelengths=grid, penalty=0.0)
    B = base.basis_matrix()
    j = B.shape[1] // 2
    mean = np.cos(3 * grid)
    a = np.random.default_rng(1).normal(size=20)
    X = mean + a[:, None] * B[:, j][None, :]
    m = fpca_fit(X, n_scores=2, wavelengths=grid, penalty=0.0)
    target = np.zeros(B.shape[1])
    target[j] = 1.0
    e = m.eigenfunctions[0]
    cos = abs(e @ m.gram @ target) / np.sqrt((e @ m.gram @ e) * (target @ m.gram @ target))
    assert cos == pytest.approx(1.0, abs=1e-8)
    assert m.eigenvalues[1] < 1e-10 * m.eigenvalues[0]


def test_fpca_reconstruction_error_non_increasing():
    ds = _curves(seed=4)
    m = fpca_fit(ds, n_scores=8)
    S = fpca_scores(m, ds)
    smooth = ds.absorbances @ m.smoother.T @ m.basis_matrix().T
    errs = [np.sum((fpca_reconstruct(m, S[:, :j]) - smooth) ** 2) for j in range(1, 9)]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(errs, errs[1:]))


def test_fpca_test_rows_do_not_change_model():
    ds = _curves(seed=5)
    m = fpca_fit(ds, n_scores=4)
    before = m.eigenfunctions.copy()
    fpca_scores(m, np.random.default_rng(0).normal(size=(3, ds.p)))
    assert np.array_equal(before, m.eigenfunctions)


def test_fpca_short_grid_clips_knots():
    X = np.random.default_rng(0).normal(size=(10, 12))
    m = fpca_fit(X, n_scores=2)
    assert m.knots.size - m.order <= 12


def test_fpca_errors():
    ds = _curves()
    with pytest.raises(DataError):
        fpca_fit(ds, n_scores=0)
    with pytest.raises(DataError):
        fpca_fit(ds.absorbances[:1], n_scores=1, wavelengths=ds.wavelengths)
    m = fpca_fit(ds, n_scores=2)
    with pytest.raises(DataError):
        fpca_scores(m, np.zeros((2, ds.p + 1)))
    with pytest.raises(DataError):
        fpca_fit(np.zeros((3, 3)), n_scores=1)
