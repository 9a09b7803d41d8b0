import warnings

import numpy as np
import pytest

from odte.svm import (
    KernelModel,
    KernelSpec,
    LinearModel,
    SvmError,
    SvmParams,
    decision_value,
    kernel_dual_objective,
    kernel_eval,
    kernel_matrix,
    linear_dual_objective,
    train_kernel_svm,
    train_linear_svm,
    train_svm,
)
from oracles import kernel_dual_grid_max, linear_dual_grid_max, random_svm_problem

RBF = KernelSpec("rbf", gamma=1.0)
HARD = SvmParams(C=1e6)


def test_kernel_eval_examples():
    x = np.array([0.3, -2.0])
    assert kernel_eval(KernelSpec("rbf", gamma=3.0), x, x) == 1.0
    assert kernel_eval(KernelSpec(), [1, 2], [3, 4]) == 11.0
    poly = KernelSpec("polynomial", gamma=1.0, degree=2, coef0=1.0)
    assert kernel_eval(poly, [1, 0], [1, 5]) == 4.0
    with pytest.raises(SvmError):
        kernel_eval(KernelSpec(), [1, 2], [1, 2, 3])


@pytest.mark.parametrize("kw", [dict(kind="sigmoid"), dict(gamma=0.0), dict(degree=0)])
def test_kernel_spec_validation(kw):
    with pytest.raises(ValueError):
        KernelSpec(**kw)


@pytest.mark.parametrize("kw", [dict(C=0.0), dict(C=-1.0), dict(max_iter=0), dict(tol=0.0)])
def test_svm_params_validation(kw):
    with pytest.raises(ValueError):
        SvmParams(**kw)


def test_linear_1d_boundary():
    m = train_linear_svm(np.array([[0.0], [2.0]]), np.array([-1.0, 1.0]), HARD)
    assert m.w[0] == pytest.approx(1.0, abs=1e-3)
    assert m.b == pytest.approx(-1.0, abs=1e-3)


def test_linear_symmetric_2d():
    m = train_linear_svm(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([-1.0, 1.0]), HARD)
    assert m.w == pytest.approx([1.0, 0.0], abs=1e-3)
    assert m.b == pytest.approx(0.0, abs=1e-3)


def test_linear_conflicting_duplicates():
    m = train_linear_svm(np.zeros((2, 1)), np.array([1.0, -1.0]), SvmParams(C=1.0))
    assert m.w == pytest.approx([0.0], abs=1e-6)
    assert m.b == pytest.approx(0.0, abs=1e-6)


def test_kernel_xor():
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    y = np.array([-1, -1, 1, 1], dtype=float)
    m = train_kernel_svm(X, y, SvmParams(C=10.0, kernel=RBF))
    assert (np.sign(m.decision_function(X)) == y).all()


def test_kernel_matches_linear_boundary_1d():
    X, y = np.array([[0.0], [2.0]]), np.array([-1.0, 1.0])
    km = train_kernel_svm(X, y, SvmParams(C=1e6, kernel=KernelSpec("linear")))
    lm = train_linear_svm(X, y, HARD)
    xs = np.linspace(-1, 3, 4001)[:, None]
    root_k = xs[np.argmin(np.abs(km.decision_function(xs)))][0]
    root_l = xs[np.argmin(np.abs(lm.decision_function(xs)))][0]
    assert root_k == pytest.approx(root_l, abs=1e-2)


def test_kernel_conflicting_duplicates_at_bound():
    X, y = np.zeros((2, 1)), np.array([1.0, -1.0])
    m = train_kernel_svm(X, y, SvmParams(C=1.0, kernel=RBF))
    assert m.alpha == pytest.approx([1.0, 1.0])
    # the brute-force grid agrees on the dual value at alpha = (C, C)
    K = kernel_matrix(RBF, X, X)
    assert kernel_dual_objective(K, y, m.alpha) == pytest.approx(kernel_dual_grid_max(K, y, 1.0))


def test_support_rows_are_positive_alphas():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 2))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=30) > 0, 1.0, -1.0)
    m = train_kernel_svm(X, y, SvmParams(C=1.0, kernel=RBF))
    assert np.array_equal(m.support, X[m.alpha > 0])
    assert np.allclose(np.abs(m.alpha_y), m.alpha[m.alpha > 0])


def test_decision_value_examples():
    lin = LinearModel(np.array([1.0, 0.0]), -1.0)
    assert decision_value(lin, [3, 5]) == 2.0
    assert decision_value(lin, [1, 7]) == 0.0  # zero goes to the positive branch
    empty = KernelModel(np.empty((0, 2)), np.empty(0), 0.25, RBF, n_features=2)
    assert decision_value(empty, [9, 9]) == 0.25
    with pytest.raises(SvmError):
        decision_value(lin, [1, 2, 3])


def test_input_errors():
    with pytest.raises(SvmError, match="both classes"):
        train_svm(np.zeros((2, 1)), np.array([1.0, 1.0]), SvmParams())
    with pytest.raises(SvmError, match="non-finite"):
        train_svm(np.array([[np.inf], [0.0]]), np.array([1.0, -1.0]), SvmParams())


def test_non_convergence_warns():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 2)) * 10
    y = rng.choice([-1.0, 1.0], 40)
    y[:2] = [1, -1]
    with pytest.warns(RuntimeWarning):
        m = train_linear_svm(X, y, SvmParams(C=100.0, max_iter=1))
    assert not m.converged


def _kkt_linear(X, y, alpha, C):
    Z = np.hstack([X, np.ones((len(y), 1))]) * y[:, None]
    g = Z @ (Z.T @ alpha) - 1.0
    pg = np.where(alpha <= 0, np.minimum(g, 0), np.where(alpha >= C, np.maximum(g, 0), g))
    return np.abs(pg).max()


def _kkt_kernel(K, y, alpha, C):
    v = -y * (y * (K @ (alpha * y)) - 1.0)
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    return v[up].max() - v[low].min() if up.any() and low.any() else 0.0


@pytest.mark.parametrize("seed", range(40))
def test_feasibility_kkt_and_self_consistency(seed):
    rng = np.random.default_rng(seed)
    X, y, C = random_svm_problem(rng, max_rows=30, max_features=4)
    lin = train_linear_svm(X, y, SvmParams(C=C, seed=seed))
    assert ((lin.alpha >= 0) & (lin.alpha <= C)).all()
    if lin.converged:
        assert _kkt_linear(X, y, lin.alpha, C) <= 1e-4
    w = np.hstack([X, np.ones((len(y), 1))]).T @ (lin.alpha * y)
    wa = np.append(lin.w, lin.b)
    assert np.abs(w - wa).max() <= 1e-10 * max(1.0, np.abs(wa).max())

    spec = KernelSpec("rbf", gamma=0.5)
    ker = train_kernel_svm(X, y, SvmParams(C=C, kernel=spec))
    assert ((ker.alpha >= 0) & (ker.alpha <= C)).all()
    assert abs(ker.alpha @ y) <= 1e-9 * max(1.0, C)
    if ker.converged:
        assert _kkt_kernel(kernel_matrix(spec, X, X), y, ker.alpha, C) <= 1e-3


@pytest.mark.parametrize("seed", range(20))
def test_dual_beats_grid_oracle_small(seed):
    rng = np.random.default_rng(1000 + seed)
    X, y, C = random_svm_problem(rng, max_rows=4)
    lin = train_linear_svm(X, y, SvmParams(C=C))
    assert linear_dual_objective(X, y, lin.alpha) >= linear_dual_grid_max(X, y, C) - 1e-3
    spec = KernelSpec("polynomial", gamma=1.0, degree=2, coef0=1.0)
    ker = train_kernel_svm(X, y, SvmParams(C=C, kernel=spec))
    K = kernel_matrix(spec, X, X)
    assert kernel_dual_objective(K, y, ker.alpha) >= kernel_dual_grid_max(K, y, C) - 1e-3


def test_bitwise_determinism():
    rng = np.random.default_rng(9)
    X, y, C = random_svm_problem(rng, max_rows=25, max_features=3)
    for params in (SvmParams(C=C, seed=3), SvmParams(C=C, kernel=RBF)):
        a, b = train_svm(X, y, params), train_svm(X, y, params)
        assert a.alpha.tobytes() == b.alpha.tobytes()
        assert a.decision_function(X).tobytes() == b.decision_function(X).tobytes()


def test_seed_changes_visit_order_not_solution_quality():
    rng = np.random.default_rng(5)
    X, y, C = random_svm_problem(rng, max_rows=25, max_features=3)
    objs = [linear_dual_objective(X, y, train_linear_svm(X, y, SvmParams(C=C, seed=s)).alpha) for s in range(3)]
    assert max(objs) - min(objs) < 1e-3
