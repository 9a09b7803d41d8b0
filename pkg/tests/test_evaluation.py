import json
from pathlib import Path

import numpy as np
import pytest

from odte.data import Dataset
from odte.ensemble import OdteParams
from odte.evaluation import (
    accuracy,
    apply_overrides,
    compare,
    cross_validate,
    default_seeds,
    grid_search,
    read_matrix_csv,
)
from odte.rng import mix

DATA = Path(__file__).parent / "data"


def majority_stub(train, test_X):
    return np.full(len(test_X), np.bincount(train.labels).argmax())


def test_accuracy_examples():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert accuracy([0, 0], [1, 1]) == 0.0
    assert accuracy([0, 1, 1, 1], [0, 1, 1, 0]) == 0.75
    with pytest.raises(ValueError):
        accuracy([0], [0, 1])
    with pytest.raises(ValueError):
        accuracy([], [])


def test_default_seeds():
    assert default_seeds(57, 3) == [mix(57, 0), mix(57, 1), mix(57, 2)]


def test_cv_majority_stub_balanced():
    ds = Dataset(np.arange(20.0)[:, None], np.arange(20) % 2, ("A", "B"))
    rep = cross_validate(ds, fit_predict=majority_stub)
    assert len(rep.fold_accuracies) == 50 and len(rep.seeds_used) == 10
    # every training split is balanced, the tie goes to label 0, each test fold is half 0
    assert rep.fold_accuracies == [0.5] * 50
    assert rep.mean == pytest.approx(np.mean(rep.fold_accuracies), abs=1e-12)
    assert rep.std == pytest.approx(np.std(rep.fold_accuracies), abs=1e-12)


def test_cv_small_partition():
    ds = Dataset(np.arange(4.0)[:, None], [0, 1, 0, 1], ("A", "B"))
    seen = []

    def spy(train, test_X):
        seen.extend(test_X[:, 0].tolist())
        return majority_stub(train, test_X)

    rep = cross_validate(ds, repetitions=1, folds=2, base_seeds=[7], fit_predict=spy)
    assert len(rep.fold_accuracies) == 2
    assert sorted(seen) == [0, 1, 2, 3]


def test_cv_deterministic_and_csv(iris):
    p = OdteParams(n_trees=3)
    a = cross_validate(iris, p, repetitions=1, folds=3)
    b = cross_validate(iris, p, repetitions=1, folds=3)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "dataset,repetition,fold,accuracy"
    assert np.isfinite(a.mean_tree_nodes)
    assert "wall_time_seconds" not in a.summary(timing=False)


def test_cv_seed_count_checked(iris):
    with pytest.raises(ValueError):
        cross_validate(iris, repetitions=2, base_seeds=[1], fit_predict=majority_stub)


def test_overrides():
    p = apply_overrides(OdteParams(), {"C": 5.0, "kernel": "rbf", "max-depth": 3, "n_trees": 7})
    assert p.base.svm.C == 5.0 and p.base.svm.kernel.kind == "rbf"
    assert p.base.max_depth == 3 and p.n_trees == 7
    with pytest.raises(KeyError):
        apply_overrides(OdteParams(), {"bogus": 1})


def test_grid_singleton_and_stub_order():
    ds = Dataset(np.zeros((4, 1)), [0, 1, 0, 1], ("A", "B"))
    res = grid_search(ds, {"C": [2.0]}, evaluate=lambda p: 0.3)
    assert res.best_overrides == {"C": 2.0} and res.best_params.base.svm.C == 2.0
    res = grid_search(ds, {"C": [1.0, 2.0]}, evaluate=lambda p: 1.0 if p.base.svm.C == 1.0 else 0.0)
    assert res.best_overrides == {"C": 1.0}
    res = grid_search(ds, {"C": [1.0, 2.0]}, evaluate=lambda p: 0.5)
    assert res.best_overrides == {"C": 1.0}
    with pytest.raises(ValueError):
        grid_search(ds, {})


def test_grid_separable_tie(separable):
    res = grid_search(separable, {"C": [0.1, 1.0, 10.0]}, base=OdteParams(n_trees=3))
    assert [r["score"] for r in res.table] == [1.0, 1.0, 1.0]
    assert res.best_overrides == {"C": 0.1}


def test_compare_identical_and_two_columns():
    rep = compare(np.full((4, 3), 0.7), ["a", "b", "c"])
    assert rep.friedman_statistic == 0.0 and rep.friedman_pvalue == 1.0
    rep = compare([[0.9, 0.8], [0.8, 0.7], [0.7, 0.71]], ["x", "y"])
    assert list(rep.holm) == ["y"]
    assert rep.holm["y"]["adjusted_p"] == rep.holm["y"]["raw_p"]
    assert (rep.holm["y"]["win"], rep.holm["y"]["tie"], rep.holm["y"]["loss"]) == (2, 0, 1)


def test_compare_report_formats():
    A, algs, names = read_matrix_csv(DATA / "tuned_means.csv")
    rep = compare(A, algs, names)
    rows = rep.to_csv().splitlines()
    assert rows[0] == "classifier,pvalue,rank,win,tie,loss"
    assert rows[1].startswith("ODTE_T,-,")
    d = json.loads(rep.to_json())
    assert d["control"] == "ODTE_T" and len(d["datasets"]) == 49
    for h in rep.holm.values():
        assert h["win"] + h["tie"] + h["loss"] == 49


def test_read_matrix_missing_cell(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("dataset,a,b\nd1,0.5,\n")
    with pytest.raises(ValueError, match="missing"):
        read_matrix_csv(p)
