"""Classifiers sharing the ``fit_*(X, labels, ...) -> model; model.predict(rows)`` contract."""

from .base import ClassifierModel, predict
from .boost import LogitBoostModel, fit_logitboost
from .discriminant import LdaModel, QdaModel, fit_lda, fit_qda
from .knn import KnnModel, fit_knn
from .pls import PlsModel, fit_plsda, nipals_pls2
from .svm import KernelSpec, SvmModel, fit_svm, kernel_bandwidth, solve_binary
from .tree import TreeModel, fit_rf, fit_tree

__all__ = [
    "ClassifierModel",
    "KernelSpec",
    "KnnModel",
    "LdaModel",
    "LogitBoostModel",
    "PlsModel",
    "QdaModel",
    "SvmModel",
    "TreeModel",
    "fit_knn",
    "fit_lda",
    "fit_logitboost",
    "fit_plsda",
    "fit_qda",
    "fit_rf",
    "fit_svm",
    "fit_tree",
    "kernel_bandwidth",
    "nipals_pls2",
    "predict",
    "solve_binary",
]
