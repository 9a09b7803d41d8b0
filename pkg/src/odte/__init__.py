"""Oblique decision tree ensembles built from SVM splits."""

from .data import Dataset, DataError, SampleView, bootstrap, load_csv, standardize, stratified_kfold
from .ensemble import (
    Ensemble,
    ModelFileError,
    OdteParams,
    SchemaMismatchError,
    ensemble_size_stats,
    fit_ensemble,
    load_model,
    predict_batch,
    predict_ensemble,
    save_model,
)
from .evaluation import CvReport, ComparisonReport, accuracy, compare, cross_validate, grid_search
from .rng import mix
from .stats import friedman_test, holm_adjust, holm_posthoc, win_tie_loss
from .stree import StreeParams, build, node_count, predict_tree
from .svm import KernelSpec, SvmParams, decision_value, kernel_eval, train_svm

__version__ = "0.1.0"
