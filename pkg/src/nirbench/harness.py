"""Preprocessor x classifier pipelines, repeated-split benchmarks and report tables.

A pipeline is a :class:`PipelineSpec`: an optional preprocessor (PCA, FPCA,
MR or GA) followed by one classifier. :func:`run_benchmark` evaluates a list
of specs on one shared sequence of stratified splits; a failing cell is
recorded and rendered NA instead of aborting the grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .classify import (
    fit_knn,
    fit_lda,
    fit_logitboost,
    fit_plsda,
    fit_qda,
    fit_rf,
    fit_svm,
    fit_tree,
    kernel_bandwidth,
)
from .dataset import SpectraDataset, TrainTestSplit, derive_seed, repeated_splits, stratified_folds
from .errors import DataError, NirbenchError, SplitError
from .reduce import fpca_fit, pca_fit
from .select import GaConfig, GaResult, ga_run, mr_select

# ----------------------------------------------------------------- preprocessors


@dataclass(frozen=True)
class PCA:
    variance_target: float = 0.99
    tag = "PCA"


@dataclass(frozen=True)
class FPCA:
    n_scores: int = 4
    tag = "FPCA"


@dataclass(frozen=True)
class MR:
    count: int = 10
    tag = "MR"


@dataclass(frozen=True)
class GA:
    config: GaConfig = field(default_factory=GaConfig)
    tag = "GA"


# ------------------------------------------------------------------- classifiers

KNN_GRID = (1, 3, 5, 7, 9, 11, 13, 15)
LB_GRID = (25, 50, 100, 200)
SVM_GRID = (0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class LDA:
    tag = "LDA"


@dataclass(frozen=True)
class QDA:
    tag = "QDA"


@dataclass(frozen=True)
class KNN:
    k_neighbors: int | None = None  # None: tune over grid
    grid: tuple = KNN_GRID
    tag = "kNN"


@dataclass(frozen=True)
class Tree:
    min_leaf: int = 5
    tag = "DCT"


@dataclass(frozen=True)
class RF:
    n_trees: int = 500
    mtry: int | None = None
    tag = "RF"


@dataclass(frozen=True)
class LogitBoost:
    n_iter: int | None = None  # None: tune over grid
    grid: tuple = LB_GRID
    tag = "LB"


@dataclass(frozen=True)
class PLSDA:
    n_components: int = 15
    tag = "PLS"


@dataclass(frozen=True)
class SVM:
    cost: float | None = None  # None: tune over grid
    grid: tuple = SVM_GRID
    tag = "SVM"


@dataclass(frozen=True)
class PipelineSpec:
    classifier: object
    preprocessor: object | None = None
    label: str = ""
    cv_folds: int = 10

    def __post_init__(self):
        if isinstance(self.classifier, PLSDA) and self.preprocessor is not None:
            raise ValueError("PLSDA runs on the raw spectra and takes no preprocessor")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if not self.label:
            name = self.classifier.tag
            if self.preprocessor is not None:
                name += " " + self.preprocessor.tag
            object.__setattr__(self, "label", name)

    @property
    def is_ga(self) -> bool:
        return isinstance(self.preprocessor, GA)

    def to_dict(self) -> dict:
        def part(obj):
            return None if obj is None else {"kind": type(obj).__name__, **asdict(obj)}

        return {"label": self.label, "classifier": part(self.classifier), "preprocessor": part(self.preprocessor)}


_CLASSIFIERS = {"lda": LDA, "qda": QDA, "knn": KNN, "tree": Tree, "dct": Tree, "rf": RF,
                "lb": LogitBoost, "logitboost": LogitBoost, "pls": PLSDA, "plsda": PLSDA, "svm": SVM}
_PREPROCESSORS = {"pca": PCA, "fpca": FPCA, "mr": MR, "ga": GA}


def parse_spec(text: str, ga_config: GaConfig | None = None) -> PipelineSpec:
    """Parse ``classifier[:value][+preprocessor[:value]]``, e.g. ``pls:15`` or ``knn+mr:10``.

    The value sets the main hyperparameter: kNN neighbours, RF trees, LB
    iterations, SVM cost, PLS components, PCA variance target, FPCA scores
    or MR count.
    """
    parts = [s.strip().lower() for s in text.split("+")]
    if not 1 <= len(parts) <= 2 or not parts[0]:
        raise ValueError(f"bad pipeline spec {text!r}")

    def split(token, table, what):
        name, _, value = token.partition(":")
        if name not in table:
            raise ValueError(f"unknown {what} {name!r} in {text!r}")
        return table[name], value

    cls, value = split(parts[0], _CLASSIFIERS, "classifier")
    try:
        if not value:
            clf = cls()
        elif cls in (KNN, LogitBoost, PLSDA, RF):
            field_name = {KNN: "k_neighbors", LogitBoost: "n_iter", PLSDA: "n_components", RF: "n_trees"}[cls]
            clf = cls(**{field_name: int(value)})
        elif cls is SVM:
            clf = SVM(cost=float(value))
        else:
            raise ValueError(f"{parts[0]!r} takes no value")
        pre = None
        if len(parts) == 2:
            pcls, value = split(parts[1], _PREPROCESSORS, "preprocessor")
            if pcls is GA:
                cfg = ga_config or GaConfig()
                pre = GA(replace(cfg, top_k=int(value)) if value else cfg)
            elif pcls is PCA:
                pre = PCA(float(value)) if value else PCA()
            else:
                pre = pcls(int(value)) if value else pcls()
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad pipeline spec {text!r}: {exc}") from None
    return PipelineSpec(clf, pre)


def preset(name: str, ga_config: GaConfig | None = None, pls_components: int = 15) -> list[PipelineSpec]:
    """Named spec rosters: ``table2``, ``pls-only`` and ``fast``.

    ``table2`` holds every classifier/preprocessor row of the reference
    accuracy table that this toolkit implements (32 rows). ``fast`` keeps the
    rows but shrinks forests, tuning grids, CV folds and the GA for CI.
    """
    if name == "pls-only":
        return [PipelineSpec(PLSDA(pls_components))]
    if name not in ("table2", "fast"):
        raise ValueError(f"unknown preset {name!r}")
    fast = name == "fast"
    if ga_config is None:
        ga_config = GaConfig(population_size=20, generations=20, cv_folds=5) if fast else GaConfig()
    ga = GA(ga_config)
    pres = [PCA(), FPCA(), MR(), ga]
    rf = RF(n_trees=100) if fast else RF()
    knn = KNN(grid=(1, 3, 5)) if fast else KNN()
    lb = LogitBoost(grid=(25, 50)) if fast else LogitBoost()
    svm = SVM(grid=(1.0, 10.0)) if fast else SVM()
    folds = 5 if fast else 10
    specs = []
    for clf in (LDA(), QDA(), knn, Tree()):
        specs += [PipelineSpec(clf, p, cv_folds=folds) for p in pres]
    for clf in (lb, rf, svm):
        specs += [PipelineSpec(clf, p, cv_folds=folds) for p in [None, *pres]]
    specs.append(PipelineSpec(PLSDA(pls_components), cv_folds=folds))
    return specs


# ------------------------------------------------------------------------ tuning


def _cv_folds(y, n_folds, seed):
    """Stratified fold ids; re-drawn once if a training part lacks a class."""
    n_folds = min(n_folds, y.size)
    present = np.unique(y)
    rng = np.random.default_rng(seed)
    for _ in range(2):
        folds = stratified_folds(y, n_folds, rng)
        if all(np.isin(present, y[folds != f]).all() for f in range(n_folds)):
            return folds, n_folds
    raise SplitError("a CV training part is missing a class even after re-drawing the folds")


def cv_accuracies(train_features, labels, grid, folds: int, fit, seed: int = 0, staged=None) -> np.ndarray:
    """Mean stratified CV accuracy for every candidate in ``grid``.

    ``fit(X, y, candidate)`` returns a model with ``predict``. When given,
    ``staged(X, y, X_test, grid)`` returns one prediction vector per
    candidate from a single fit (used for boosting iteration counts).
    """
    X = np.asarray(train_features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    grid = list(grid)
    if not grid:
        raise ValueError("empty tuning grid")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    fold_id, n_folds = _cv_folds(y, folds, seed)
    correct = np.zeros(len(grid))
    for f in range(n_folds):
        tr, te = fold_id != f, fold_id == f
        if staged is not None:
            preds = staged(X[tr], y[tr], X[te], grid)
        else:
            preds = [fit(X[tr], y[tr], c).predict(X[te]) for c in grid]
        correct += [np.sum(p == y[te]) for p in preds]
    return correct / y.size


def tune_by_cv(train_features, labels, grid, folds: int, fit, seed: int = 0, staged=None):
    """Candidate with the highest CV accuracy; ties go to the earliest grid entry.

    Grids are ordered simplest first (fewest neighbours, fewest iterations,
    smallest cost), so ties resolve to the simplest model.
    """
    grid = list(grid)
    if len(grid) == 1:
        return grid[0]
    acc = cv_accuracies(train_features, labels, grid, folds, fit, seed, staged)
    return grid[int(np.argmax(acc))]


# ------------------------------------------------------------------- pipelines


def confusion_matrix(predicted, reference, k: int) -> np.ndarray:
    """k x k counts; entry (r, c) counts samples predicted r whose reference is c."""
    pred = np.asarray(predicted, dtype=np.int64)
    ref = np.asarray(reference, dtype=np.int64)
    if pred.shape != ref.shape or pred.ndim != 1:
        raise DataError("predicted and reference labels must be equal-length 1-D sequences")
    for name, v in (("predicted", pred), ("reference", ref)):
        if v.size and (v.min() < 0 or v.max() >= k):
            raise DataError(f"{name} label out of range for {k} classes")
    out = np.zeros((k, k), dtype=np.int64)
    np.add.at(out, (pred, ref), 1)
    return out


def fit_ga(pre: GA, train: SpectraDataset, seed: int = 0) -> GaResult:
    """GA run behind a GA preprocessor, kept whole for its fitness trace."""
    return ga_run(train, replace(pre.config, seed=derive_seed(pre.config.seed, seed)))


def fit_preprocessor(pre, train: SpectraDataset, seed: int = 0):
    """Fitted transform for ``pre`` on the training rows (None passes data through)."""
    if pre is None:
        return None
    if isinstance(pre, PCA):
        return pca_fit(train, variance_target=pre.variance_target)
    if isinstance(pre, FPCA):
        return fpca_fit(train, n_scores=pre.n_scores)
    if isinstance(pre, MR):
        return mr_select(train, pre.count)
    if isinstance(pre, GA):
        return fit_ga(pre, train, seed).subset
    raise TypeError(f"unknown preprocessor {pre!r}")


def _lb_staged(Xtr, ytr, Xte, grid, k):
    model = fit_logitboost(Xtr, ytr, n_iter=max(grid), n_classes=k)
    return [model.staged_predict(Xte, g) for g in grid]


def fit_classifier(clf, X, y, k: int, cv_folds: int = 10, seed: int = 0):
    """Fit ``clf`` on (X, y); hyperparameters left as None are tuned by CV on (X, y)."""
    if isinstance(clf, LDA):
        return fit_lda(X, y, n_classes=k)
    if isinstance(clf, QDA):
        return fit_qda(X, y, n_classes=k)
    if isinstance(clf, Tree):
        return fit_tree(X, y, min_leaf=clf.min_leaf, n_classes=k)
    if isinstance(clf, RF):
        return fit_rf(X, y, n_trees=clf.n_trees, mtry=clf.mtry, seed=seed, n_classes=k)
    if isinstance(clf, PLSDA):
        return fit_plsda(X, y, clf.n_components, n_classes=k)
    if isinstance(clf, KNN):
        kk = clf.k_neighbors
        if kk is None:
            grid = [g for g in clf.grid if g <= max(1, y.size - y.size // cv_folds - 1)] or [1]
            kk = tune_by_cv(X, y, grid, cv_folds, lambda a, b, c: fit_knn(a, b, c, n_classes=k), seed)
        return fit_knn(X, y, kk, n_classes=k)
    if isinstance(clf, LogitBoost):
        n_iter = clf.n_iter
        if n_iter is None:
            n_iter = tune_by_cv(X, y, clf.grid, cv_folds, None, seed,
                                staged=lambda a, b, c, g: _lb_staged(a, b, c, g, k))
        return fit_logitboost(X, y, n_iter=n_iter, n_classes=k)
    if isinstance(clf, SVM):
        kernel = kernel_bandwidth(X, seed=seed)
        cost = clf.cost
        if cost is None:
            cost = tune_by_cv(X, y, clf.grid, cv_folds,
                              lambda a, b, c: fit_svm(a, b, c, kernel=kernel, n_classes=k), seed)
        return fit_svm(X, y, cost, kernel=kernel, n_classes=k)
    raise TypeError(f"unknown classifier {clf!r}")


def _transform(fitted, rows: SpectraDataset):
    return rows.absorbances if fitted is None else fitted.transform(rows)


def run_pipeline(data: SpectraDataset, spec: PipelineSpec, split: TrainTestSplit, seed: int = 0,
                 fitted_preprocessor=None, details: dict | None = None):
    """Fit on the training rows, predict the test rows; returns (accuracy, confusion).

    When ``details`` is a dict it receives the fitted ``preprocessor``, the
    fitted ``model`` and ``n_features``, the classifier's input width.
    """
    train = data.subset(split.train)
    test = data.subset(split.test)
    fitted = fitted_preprocessor
    if fitted is None:
        fitted = fit_preprocessor(spec.preprocessor, train, seed)
    Xtr = _transform(fitted, train)
    Xte = _transform(fitted, test)
    model = fit_classifier(spec.classifier, Xtr, train.labels, data.k, spec.cv_folds, seed)
    pred = model.predict(Xte)
    cm = confusion_matrix(pred, test.labels, data.k)
    if details is not None:
        details.update(preprocessor=fitted, model=model, n_features=Xtr.shape[1])
    return float(np.trace(cm) / max(test.n, 1)), cm


# ---------------------------------------------------------------------- reports


@dataclass(eq=False)
class BenchmarkReport:
    label: str
    splits: list  # split indices that produced an accuracy
    accuracies: list  # fractions, aligned with ``splits``
    last_split_confusion: np.ndarray | None
    errors: list  # (split index, message)
    single_split: bool = False
    feature_counts: list = field(default_factory=list)  # classifier input width per split
    ga_trace: list | None = None  # per generation (best, mean, mean features) of the GA behind this row

    @property
    def mean_features(self) -> float | None:
        """Average reduced dimension across splits (e.g. retained principal components)."""
        return float(np.mean(self.feature_counts)) if self.feature_counts else None

    @property
    def failed(self) -> bool:
        return bool(self.errors) or not self.accuracies

    @property
    def mean_acc(self) -> float | None:
        return None if self.failed else float(np.mean(self.accuracies))

    @property
    def sd_acc(self) -> float | None:
        """Sample standard deviation; None for failed cells, GA cells and single splits."""
        if self.failed or self.single_split or len(self.accuracies) < 2:
            return None
        return float(np.std(self.accuracies, ddof=1))

    def to_dict(self) -> dict:
        cm = self.last_split_confusion
        return {
            "label": self.label,
            "mean_acc": self.mean_acc,
            "sd_acc": self.sd_acc,
            "splits": list(self.splits),
            "accuracies": list(self.accuracies),
            "last_split_confusion": None if cm is None else cm.tolist(),
            "errors": [{"split": s, "message": m} for s, m in self.errors],
            "mean_features": self.mean_features,
            "ga_trace": None if self.ga_trace is None else [list(t) for t in self.ga_trace],
        }


_CELL_ERRORS = (NirbenchError, np.linalg.LinAlgError, ValueError)


def _run_split(data, specs, split_index, split, seed):
    """Every spec on one split, sharing fitted preprocessors (and their failures) across specs."""
    cache = {}
    traces = {}
    out = []
    train = data.subset(split.train)
    for spec_index, spec in enumerate(specs):
        if spec.is_ga and split_index != 0:
            out.append(None)
            continue
        pre = spec.preprocessor
        try:
            if pre not in cache:
                try:
                    pre_seed = derive_seed(seed, split_index, 0x5E1)
                    if isinstance(pre, GA):
                        res = fit_ga(pre, train, pre_seed)
                        cache[pre], traces[pre] = res.subset, res.trace
                    else:
                        cache[pre] = fit_preprocessor(pre, train, pre_seed)
                except _CELL_ERRORS as exc:
                    cache[pre] = exc
            if isinstance(cache[pre], Exception):
                raise cache[pre]
            info = {}
            acc, cm = run_pipeline(data, spec, split, derive_seed(seed, spec_index, split_index), cache[pre],
                                   details=info)
            out.append((acc, cm, info["n_features"], None, traces.get(pre)))
        except _CELL_ERRORS as exc:
            out.append((None, None, None, f"{type(exc).__name__}: {exc}", traces.get(pre)))
    return out


def run_benchmark(data: SpectraDataset, specs, n_splits: int = 100, fraction: float = 0.5, seed: int = 0,
                  threads: int | None = None) -> list[BenchmarkReport]:
    """Evaluate ``specs`` on ``n_splits`` shared stratified splits.

    GA-preprocessed specs run on split 0 only and carry no SD. Results do not
    depend on ``threads``: each cell's seed derives from (seed, spec, split).
    """
    specs = list(specs)
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    if not specs:
        raise ValueError("no pipeline specs given")
    splits = repeated_splits(data, fraction, n_splits, seed)
    threads = threads or os.cpu_count() or 1

    def job(i):
        return _run_split(data, specs, i, splits[i], seed)

    if threads == 1:
        cells = [job(i) for i in range(n_splits)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(job, range(n_splits)))

    reports = []
    for s, spec in enumerate(specs):
        rep = BenchmarkReport(spec.label, [], [], None, [], single_split=spec.is_ga)
        for i in range(n_splits):
            cell = cells[i][s]
            if cell is None:
                continue
            acc, cm, width, err, trace = cell
            if trace is not None:
                rep.ga_trace = trace
            if err is not None:
                rep.errors.append((i, err))
                rep.last_split_confusion = None
            else:
                rep.splits.append(i)
                rep.accuracies.append(acc)
                rep.feature_counts.append(width)
                rep.last_split_confusion = cm
        reports.append(rep)
    return reports


def _half_up(x: float, places: int) -> str:
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def table_rows(reports) -> list[tuple[str, str, str]]:
    """(label, ACC percent rounded to an integer, SD to two decimals); NA where undefined."""
    rows = []
    for r in reports:
        m, s = r.mean_acc, r.sd_acc
        acc = "NA" if m is None else _half_up(100.0 * m, 0)
        sd = "NA" if s is None else _half_up(s, 2)
        rows.append((r.label, acc, sd))
    return rows


def emit_table(reports) -> tuple[str, str]:
    """CSV text and an aligned plain-text rendering of the accuracy table."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to tabulate")
    rows = table_rows(reports)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Model", "ACC", "SD"])
    writer.writerows(rows)
    width = max(len("Model"), *(len(r[0]) for r in rows))
    lines = [f"{'Model':<{width}}  {'ACC':>4}  {'SD':>5}"]
    lines += [f"{a:<{width}}  {b:>4}  {c:>5}" for a, b, c in rows]
    return buf.getvalue(), "\n".join(lines) + "\n"


def confusion_csv(cm: np.ndarray, class_names) -> str:
    """Rows are predictions, columns references, both headed by class name."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["prediction", *class_names])
    for name, row in zip(class_names, cm):
        writer.writerow([name, *map(int, row)])
    return buf.getvalue()


def reports_json(reports, specs=None, meta: dict | None = None) -> str:
    payload = {"meta": meta or {}, "reports": [r.to_dict() for r in reports]}
    if specs is not None:
        for entry, spec in zip(payload["reports"], specs):
            entry["spec"] = spec.to_dict()
    return json.dumps(payload, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return None if math.isnan(obj) else float(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")
