"""Repeated stratified cross-validation, grid search and comparison reports."""

import csv
import io
import itertools
import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import standardize, stratified_kfold
from .ensemble import OdteParams, ensemble_size_stats, fit_ensemble, predict_batch
from .rng import mix
from . import stats

DEFAULT_REPETITIONS = 10
DEFAULT_FOLDS = 5


def accuracy(predicted, truth):
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    if truth.size == 0:
        raise ValueError("accuracy of an empty sequence")
    return float(np.mean(predicted == truth))


def default_seeds(root_seed, repetitions=DEFAULT_REPETITIONS):
    return [mix(root_seed, r) for r in range(repetitions)]


@dataclass
class CvReport:
    dataset_name: str
    fold_accuracies: list
    mean: float
    std: float
    seeds_used: list
    mean_tree_nodes: float
    wall_time_seconds: float
    folds: int = DEFAULT_FOLDS

    def fold_rows(self):
        for i, acc in enumerate(self.fold_accuracies):
            yield self.dataset_name, i // self.folds, i % self.folds, acc

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "repetition", "fold", "accuracy"])
        for name, r, f, acc in self.fold_rows():
            w.writerow([name, r, f, repr(acc)])
        return buf.getvalue()

    def summary(self, timing=True):
        d = asdict(self)
        if not timing:
            d.pop("wall_time_seconds")
        return d


def odte_fit_predict(params, threads=1):
    """Fit/predict callable backed by ODTE; also reports mean tree size."""

    def fit_predict(train, test_X):
        ens = fit_ensemble(train, params, threads=threads)
        return predict_batch(ens, test_X), ensemble_size_stats(ens)["mean_nodes"]

    return fit_predict


def cross_validate(
    dataset,
    params=None,
    repetitions=DEFAULT_REPETITIONS,
    folds=DEFAULT_FOLDS,
    base_seeds=None,
    standardize_features=False,
    fit_predict=None,
    threads=1,
):
    """Repeated stratified k-fold accuracy.

    ``fit_predict(train_dataset, test_features)`` may return the predicted
    label indices or a ``(predictions, mean_tree_nodes)`` pair. When omitted
    it is built from ``params`` (an :class:`OdteParams`).
    """
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if base_seeds is None:
        base_seeds = default_seeds(params.seed if params else 57, repetitions)
    base_seeds = [int(s) for s in base_seeds]
    if len(base_seeds) != repetitions:
        raise ValueError(f"need {repetitions} base seeds, got {len(base_seeds)}")
    if fit_predict is None:
        fit_predict = odte_fit_predict(params or OdteParams(), threads)

    start = time.perf_counter()
    accs = []
    sizes = []
    for seed in base_seeds:
        for train, test in stratified_kfold(dataset, folds, seed):
            if standardize_features:
                _, train_d, (test_d,) = standardize(train, [test])
            else:
                train_d, test_d = train.materialize(), test.materialize()
            out = fit_predict(train_d, test_d.features)
            if isinstance(out, tuple):
                pred, nodes = out
                sizes.append(nodes)
            else:
                pred = out
            accs.append(accuracy(pred, test_d.labels))
    acc = np.array(accs)
    return CvReport(
        dataset_name=dataset.name,
        fold_accuracies=[float(a) for a in acc],
        mean=float(acc.mean()),
        std=float(acc.std()),
        seeds_used=base_seeds,
        mean_tree_nodes=float(np.mean(sizes)) if sizes else float("nan"),
        wall_time_seconds=time.perf_counter() - start,
        folds=folds,
    )


# --- hyperparameter overrides ----------------------------------------------

# flag name -> (where, field)
PARAM_FIELDS = {
    "C": ("svm", "C"),
    "max_iter": ("svm", "max_iter"),
    "tol": ("svm", "tol"),
    "kernel": ("kernel", "kind"),
    "gamma": ("kernel", "gamma"),
    "degree": ("kernel", "degree"),
    "coef0": ("kernel", "coef0"),
    "strategy": ("base", "multiclass_strategy"),
    "multiclass_strategy": ("base", "multiclass_strategy"),
    "splitter": ("base", "splitter"),
    "max_depth": ("base", "max_depth"),
    "min_samples_split": ("base", "min_samples_split"),
    "n_trees": ("odte", "n_trees"),
    "max_features": ("odte", "max_features"),
    "bootstrap_size": ("odte", "bootstrap_size"),
}


def apply_overrides(params, overrides):
    """Return ``params`` (an :class:`OdteParams`) with flag-named fields replaced."""
    groups = {"svm": {}, "kernel": {}, "base": {}, "odte": {}}
    for key, value in overrides.items():
        norm = key.lstrip("-").replace("-", "_")
        if norm not in PARAM_FIELDS:
            raise KeyError(f"unknown hyperparameter {key!r}")
        where, name = PARAM_FIELDS[norm]
        groups[where][name] = value
    base = params.base
    svm = base.svm
    if groups["kernel"]:
        svm = replace(svm, kernel=replace(svm.kernel, **groups["kernel"]))
    if groups["svm"]:
        svm = replace(svm, **groups["svm"])
    base = replace(base, svm=svm, **groups["base"])
    return replace(params, base=base, **groups["odte"])


@dataclass
class GridResult:
    best_params: OdteParams
    best_overrides: dict
    table: list = field(default_factory=list)


def grid_search(dataset, grid, inner=(1, DEFAULT_FOLDS), seed=57, base=None, evaluate=None):
    """Exhaustive search over the Cartesian product of ``grid``.

    Configurations are visited in ``itertools.product`` order over the grid's
    keys as given; the first configuration reaching the highest mean inner-CV
    accuracy wins. ``evaluate(params) -> float`` replaces the inner CV.
    """
    if not grid:
        raise ValueError("empty grid")
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], (list, tuple)) or not grid[k]:
            raise ValueError(f"grid entry {k!r} must be a non-empty list")
    base = base or OdteParams(seed=seed)
    reps, folds = inner
    seeds = default_seeds(seed, reps)

    if evaluate is None:

        def evaluate(p):
            return cross_validate(dataset, p, reps, folds, seeds).mean

    best = None
    table = []
    for values in itertools.product(*(grid[k] for k in keys)):
        overrides = dict(zip(keys, values))
        p = apply_overrides(base, overrides)
        score = float(evaluate(p))
        table.append({**overrides, "score": score})
        if best is None or score > best[0]:
            best = (score, p, overrides)
    return GridResult(best[1], best[2], table)


# --- algorithm comparison ---------------------------------------------------


@dataclass
class ComparisonReport:
    algorithms: list
    datasets: list
    accuracy_matrix: list
    avg_ranks: list
    friedman_statistic: float
    friedman_pvalue: float
    iman_davenport: float
    iman_davenport_pvalue: float
    control: str
    holm: dict
    alpha: float = 0.05

    def table_rows(self):
        """Rows shaped like a post-hoc table: control first, then by rank."""
        ranks = dict(zip(self.algorithms, self.avg_ranks))
        yield {"classifier": self.control, "pvalue": None, "rank": ranks[self.control],
               "win": None, "tie": None, "loss": None}
        for name in sorted(self.holm, key=lambda a: (ranks[a], self.algorithms.index(a))):
            h = self.holm[name]
            yield {"classifier": name, "pvalue": h["adjusted_p"], "rank": ranks[name],
                   "win": h["win"], "tie": h["tie"], "loss": h["loss"]}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["classifier", "pvalue", "rank", "win", "tie", "loss"])
        for r in self.table_rows():
            w.writerow(["-" if v is None else (repr(v) if isinstance(v, float) else v)
                        for v in r.values()])
        return buf.getvalue()

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


def compare(matrix, algorithms, datasets=None, control=None, alpha=0.05):
    """Friedman test plus Holm post-hoc against ``control`` (default: best ranked)."""
    A = np.asarray(matrix, dtype=np.float64)
    algorithms = list(algorithms)
    if A.ndim != 2 or A.shape[1] != len(algorithms):
        raise ValueError("matrix columns must match algorithm names")
    datasets = list(datasets) if datasets is not None else [str(i + 1) for i in range(A.shape[0])]
    fr = stats.friedman_test(A)
    ctrl = algorithms.index(control) if control is not None else None
    ctrl, rows = stats.holm_posthoc(fr["avg_ranks"], A.shape[0], ctrl, alpha)
    wtl = stats.win_tie_loss(A, ctrl)
    holm = {}
    for row in rows:
        j = row["index"]
        win, tie, loss = wtl[j]
        holm[algorithms[j]] = {
            "z": row["z"],
            "raw_p": row["raw_p"],
            "adjusted_p": row["adjusted_p"],
            "reject": row["reject"],
            "win": win,
            "tie": tie,
            "loss": loss,
        }
    return ComparisonReport(
        algorithms=algorithms,
        datasets=datasets,
        accuracy_matrix=A.tolist(),
        avg_ranks=[float(r) for r in fr["avg_ranks"]],
        friedman_statistic=fr["statistic"],
        friedman_pvalue=fr["pvalue"],
        iman_davenport=fr["iman_davenport"],
        iman_davenport_pvalue=fr["iman_davenport_pvalue"],
        control=algorithms[ctrl],
        holm=holm,
        alpha=alpha,
    )


def read_matrix_csv(path):
    """Read ``dataset,alg1,alg2,...`` rows; raises on missing cells."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header and at least one data row")
    algorithms = [h.strip() for h in rows[0][1:]]
    datasets = []
    values = []
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(algorithms) + 1:
            raise ValueError(f"{path}: row {i} has {len(row)} cells, expected {len(algorithms) + 1}")
        cells = [c.strip() for c in row[1:]]
        for j, c in enumerate(cells):
            if c == "":
                raise ValueError(f"{path}: missing value at row {i}, column {algorithms[j]!r}")
        try:
            values.append([float(c) for c in cells])
        except ValueError as exc:
            raise ValueError(f"{path}: row {i}: {exc}") from None
        datasets.append(row[0].strip())
    return np.array(values), algorithms, datasets
