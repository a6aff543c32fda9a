import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nirbench.classify import fit_knn
from nirbench.dataset import SpectraDataset, TrainTestSplit, repeated_splits, synth_spectra
from nirbench.errors import DataError
from nirbench.harness import (
    FPCA,
    GA,
    KNN,
    LDA,
    MR,
    PCA,
    PLSDA,
    QDA,
    RF,
    SVM,
    BenchmarkReport,
    LogitBoost,
    PipelineSpec,
    Tree,
    confusion_csv,
    confusion_matrix,
    cv_accuracies,
    emit_table,
    parse_spec,
    preset,
    reports_json,
    run_benchmark,
    run_pipeline,
    table_rows,
    tune_by_cv,
)
from nirbench.select import GaConfig

from oracles import confusion_count


@pytest.fixture(scope="module")
def spectra():
    return synth_spectra(12, 60, 3, [10, 30, 45], 0.02, seed=0)


# ------------------------------------------------------------------ specs


def test_spec_labels_and_pls_rule():
    assert PipelineSpec(LDA(), PCA()).label == "LDA PCA"
    assert PipelineSpec(PLSDA(15)).label == "PLS"
    assert PipelineSpec(Tree(), MR()).label == "DCT MR"
    with pytest.raises(ValueError):
        PipelineSpec(PLSDA(5), PCA())


def test_parse_spec():
    assert parse_spec("pls:15") == PipelineSpec(PLSDA(15))
    assert parse_spec("lda+pca") == PipelineSpec(LDA(), PCA())
    assert parse_spec("knn:5+mr:8") == PipelineSpec(KNN(5), MR(8))
    assert parse_spec("svm:10+fpca:3") == PipelineSpec(SVM(10.0), FPCA(3))
    assert parse_spec("rf:50") == PipelineSpec(RF(n_trees=50))
    assert parse_spec("lb+ga:4").preprocessor.config.top_k == 4
    for bad in ("", "foo", "lda:3", "lda+bar", "pls+pca", "knn:x", "a+b+c"):
        with pytest.raises(ValueError):
            parse_spec(bad)


def test_presets():
    rows = preset("table2")
    labels = [s.label for s in rows]
    assert len(rows) == 32
    assert len(set(labels)) == 32
    assert labels[-1] == "PLS"
    assert {"LB", "RF", "SVM", "QDA PCA", "kNN GA", "DCT FPCA"} <= set(labels)
    assert [s.label for s in preset("fast")] == labels
    assert preset("pls-only", pls_components=10) == [PipelineSpec(PLSDA(10))]
    with pytest.raises(ValueError):
        preset("nope")


# --------------------------------------------------------------- confusion


def test_confusion_matches_counting_oracle():
    rng = np.random.default_rng(0)
    pred, ref = rng.integers(0, 4, 50), rng.integers(0, 4, 50)
    assert np.array_equal(confusion_matrix(pred, ref, 4), confusion_count(pred, ref, 4))


def test_confusion_orientation_and_errors():
    cm = confusion_matrix([1, 1, 0], [0, 1, 0], 2)
    assert cm.tolist() == [[1, 0], [1, 1]]  # row = prediction, column = reference
    assert np.trace(confusion_matrix([2, 0, 1], [2, 0, 1], 3)) == 3
    with pytest.raises(DataError):
        confusion_matrix([0, 3], [0, 1], 3)
    with pytest.raises(DataError):
        confusion_matrix([0], [0, 1], 3)


def test_honey_style_confusion():
    names = ["bi", "fg", "hfcs", "pure"]
    ref = np.array([1] * 112 + [3] * 79)
    pred = ref.copy()
    pred[:5] = 3
    pred[112:117] = 1
    cm = confusion_matrix(pred, ref, 4)
    assert cm[1, 3] == 5 and cm[3, 1] == 5
    text = confusion_csv(cm, names)
    assert text.splitlines()[0] == "prediction,bi,fg,hfcs,pure"
    assert text.splitlines()[2] == "fg,0,107,0,5"


# ------------------------------------------------------------------ tuning


def test_tune_knn_on_separable_data():
    X, y = synth_spectra(15, 5, 3, [1, 3], 0.01, seed=1, bump_width=0, smooth_sd=0.0).absorbances, np.repeat(
        np.arange(3), 15)
    grid = [1, 3, 5, 7]
    fit = lambda a, b, c: fit_knn(a, b, c)  # noqa: E731
    best = tune_by_cv(X, y, grid, 5, fit, seed=0)
    acc = cv_accuracies(X, y, grid, 5, fit, seed=0)
    assert best in (1, 3)
    assert acc[grid.index(best)] == pytest.approx(1.0)


def test_tune_single_candidate_and_ties():
    X = np.ones((20, 3))
    y = np.repeat([0, 1], 10)
    fit = lambda a, b, c: fit_knn(a, b, c)  # noqa: E731
    assert tune_by_cv(X, y, [7], 5, fit) == 7
    assert tune_by_cv(X, y, [1, 3, 5], 5, fit) == 1
    with pytest.raises(ValueError):
        cv_accuracies(X, y, [], 5, fit)


# ---------------------------------------------------------------- pipelines


def test_run_pipeline_pls(spectra):
    split = repeated_splits(spectra, 0.5, 1, seed=0)[0]
    acc, cm = run_pipeline(spectra, PipelineSpec(PLSDA(5)), split)
    assert cm.shape == (3, 3)
    assert acc == pytest.approx(np.trace(cm) / split.test.size)
    assert cm.sum(axis=0).tolist() == np.bincount(spectra.labels[split.test], minlength=3).tolist()


def test_single_class_identical_train_test():
    X = np.random.default_rng(0).normal(size=(6, 4))
    ds = SpectraDataset(X, np.zeros(6, dtype=int), ["only"], np.arange(4.0))
    split = TrainTestSplit(np.arange(6), np.arange(6), 0)
    acc, cm = run_pipeline(ds, PipelineSpec(KNN(1)), split)
    assert acc == 1.0 and cm.tolist() == [[6]]


@pytest.mark.parametrize("spec", [
    PipelineSpec(LDA(), PCA()),
    PipelineSpec(KNN(), FPCA()),
    PipelineSpec(Tree(), MR(5)),
    PipelineSpec(LogitBoost(), cv_folds=3),
    PipelineSpec(SVM(), MR(5), cv_folds=3),
    PipelineSpec(RF(n_trees=20), PCA()),
], ids=lambda s: s.label)
def test_no_leak_from_test_rows(spectra, spec):
    split = repeated_splits(spectra, 0.5, 1, seed=3)[0]
    X2 = spectra.absorbances.copy()
    X2[split.test] += np.random.default_rng(1).normal(size=(split.test.size, spectra.p))
    other = SpectraDataset(X2, spectra.labels, spectra.class_names, spectra.wavelengths)
    a, b = {}, {}
    run_pipeline(spectra, spec, split, seed=5, details=a)
    run_pipeline(other, spec, split, seed=5, details=b)
    assert json.dumps(a["model"].to_dict(), default=str) == json.dumps(b["model"].to_dict(), default=str)
    if a["preprocessor"] is not None:
        assert json.dumps(a["preprocessor"].to_dict() if hasattr(a["preprocessor"], "to_dict")
                          else a["preprocessor"].to_json()) == json.dumps(
            b["preprocessor"].to_dict() if hasattr(b["preprocessor"], "to_dict") else b["preprocessor"].to_json())


# ---------------------------------------------------------------- benchmark


def test_benchmark_shared_splits_and_stats(spectra):
    specs = [PipelineSpec(PLSDA(4)), PipelineSpec(LDA(), PCA()), PipelineSpec(KNN(3), MR(5))]
    reps = run_benchmark(spectra, specs, n_splits=4, seed=2, threads=1)
    assert [r.label for r in reps] == ["PLS", "LDA PCA", "kNN MR"]
    for r in reps:
        assert r.splits == [0, 1, 2, 3]
        assert r.mean_acc == pytest.approx(np.mean(r.accuracies), abs=1e-12)
        assert r.sd_acc == pytest.approx(np.std(r.accuracies, ddof=1), abs=1e-12)
        assert np.trace(r.last_split_confusion) / r.last_split_confusion.sum() == pytest.approx(r.accuracies[-1])
    split3 = repeated_splits(spectra, 0.5, 4, seed=2)[3]
    acc, _ = run_pipeline(spectra, specs[0], split3)
    assert reps[0].accuracies[3] == pytest.approx(acc)


def test_benchmark_deterministic_and_thread_independent(spectra):
    specs = [PipelineSpec(RF(n_trees=15), PCA()), PipelineSpec(KNN(grid=(1, 3)), cv_folds=3)]
    a = run_benchmark(spectra, specs, n_splits=3, seed=7, threads=1)
    b = run_benchmark(spectra, specs, n_splits=3, seed=7, threads=3)
    assert reports_json(a) == reports_json(b)


def test_benchmark_ga_single_split_and_failures(spectra):
    ga = GA(GaConfig(population_size=6, generations=2, n_trees=5, cv_folds=3))
    specs = [PipelineSpec(KNN(1), ga), PipelineSpec(QDA())]
    reps = run_benchmark(spectra, specs, n_splits=3, seed=1, threads=1)
    assert reps[0].splits == [0]
    assert reps[0].sd_acc is None and reps[0].mean_acc is not None
    assert reps[1].failed and reps[1].mean_acc is None
    assert len(reps[1].errors) == 3 and "SingularCovarianceError" in reps[1].errors[0][1]
    assert table_rows(reps) == [("kNN GA", table_rows(reps)[0][1], "NA"), ("QDA", "NA", "NA")]
    assert len(reps[0].ga_trace) == 2 and reps[1].ga_trace is None


def test_ga_rows_share_one_run(spectra, monkeypatch):
    import nirbench.harness as h

    calls = []
    real = h.fit_ga
    monkeypatch.setattr(h, "fit_ga", lambda *a: calls.append(1) or real(*a))
    ga = GA(GaConfig(population_size=4, generations=2, n_trees=5, cv_folds=3))
    reps = run_benchmark(spectra, [PipelineSpec(LDA(), ga), PipelineSpec(KNN(1), ga)], n_splits=2, threads=1)
    assert len(calls) == 1
    assert reps[0].ga_trace == reps[1].ga_trace


def test_failed_preprocessor_is_fitted_once(spectra, monkeypatch):
    import nirbench.harness as h

    calls = []

    def broken(pre, train, seed=0):
        calls.append(pre)
        raise DataError("boom")

    monkeypatch.setattr(h, "fit_preprocessor", broken)
    reps = run_benchmark(spectra, [PipelineSpec(LDA(), MR(3)), PipelineSpec(KNN(1), MR(3))], n_splits=2, threads=1)
    assert len(calls) == 2  # once per split, not once per row
    assert all(r.failed and "boom" in r.errors[0][1] for r in reps)


def test_benchmark_single_split_sd_na(spectra):
    reps = run_benchmark(spectra, [PipelineSpec(PLSDA(3))], n_splits=1, seed=0, threads=1)
    assert reps[0].sd_acc is None
    assert table_rows(reps)[0][2] == "NA"


def test_benchmark_reports_mean_pca_dimension(spectra):
    reps = run_benchmark(spectra, [PipelineSpec(LDA(), PCA(0.9))], n_splits=3, seed=0, threads=1)
    assert reps[0].mean_features == pytest.approx(np.mean(reps[0].feature_counts))
    assert all(1 <= c < spectra.p for c in reps[0].feature_counts)


# -------------------------------------------------------------------- tables


def _report(label, accs, errors=(), single=False):
    return BenchmarkReport(label, list(range(len(accs))), list(accs), None, list(errors), single)


def test_emit_table_formats():
    accs = [0.935 + 0.02 * ((i % 2) * 2 - 1) for i in range(10)]
    csv_text, txt = emit_table([_report("PLS", accs)])
    row = csv_text.splitlines()[1].split(",")
    assert row == ["PLS", "94", "0.02"]
    assert txt.splitlines()[1].split() == ["PLS", "94", "0.02"]


def test_emit_table_na_and_rounding():
    rows = table_rows([
        _report("A", [0.5, 0.5], errors=[(0, "x")]),
        _report("B", [], errors=[(0, "x"), (1, "y")]),
        _report("C", [0.805, 0.805]),
        _report("D", [0.9], single=True),
    ])
    assert rows[0][1:] == ("NA", "NA")
    assert rows[1][1:] == ("NA", "NA")
    assert rows[2][1:] == ("81", "0.00")  # 80.5 rounds half up
    assert rows[3][1:] == ("90", "NA")
    with pytest.raises(ValueError):
        emit_table([])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=30))
def test_report_stats_recomputable(accs):
    r = _report("X", accs)
    assert r.mean_acc == pytest.approx(np.mean(accs), abs=1e-12)
    assert r.sd_acc == pytest.approx(np.std(accs, ddof=1), abs=1e-12)


def test_reports_json_round_trip(spectra):
    specs = [PipelineSpec(PLSDA(3))]
    reps = run_benchmark(spectra, specs, n_splits=2, seed=0, threads=1)
    payload = json.loads(reports_json(reps, specs, {"seed": 0}))
    assert payload["meta"] == {"seed": 0}
    entry = payload["reports"][0]
    assert entry["label"] == "PLS" and entry["spec"]["classifier"]["kind"] == "PLSDA"
    assert len(entry["accuracies"]) == 2
