"""Chemometric classification of NIR spectra with a repeated-split benchmark harness."""

from .dataset import (
    SpectraDataset,
    TrainTestSplit,
    load_csv,
    repeated_splits,
    save_csv,
    stratified_split,
    synth_spectra,
)
from .errors import ConvergenceError, DataError, NirbenchError, SingularCovarianceError, SplitError
from .harness import PipelineSpec, emit_table, parse_spec, preset, run_benchmark, run_pipeline
from .reduce import fpca_fit, fpca_scores, pca_fit, pca_transform
from .select import FeatureSubset, GaConfig, ga_select, mr_scores, mr_select, mr_top

__all__ = [
    "ConvergenceError",
    "DataError",
    "FeatureSubset",
    "GaConfig",
    "NirbenchError",
    "PipelineSpec",
    "SingularCovarianceError",
    "SpectraDataset",
    "SplitError",
    "TrainTestSplit",
    "emit_table",
    "fpca_fit",
    "fpca_scores",
    "ga_select",
    "load_csv",
    "mr_scores",
    "mr_select",
    "mr_top",
    "parse_spec",
    "pca_fit",
    "pca_transform",
    "preset",
    "repeated_splits",
    "run_benchmark",
    "run_pipeline",
    "save_csv",
    "stratified_split",
    "synth_spectra",
]
