"""Binary soft-margin SVMs.

Two trainers share the ``SvmParams`` surface:

* :func:`train_linear_svm` runs dual coordinate descent on the hinge-loss SVM.
  The bias is folded in as an extra constant feature, so it is regularized
  like any other weight and the dual is a plain box ``0 <= alpha <= C``.
* :func:`train_kernel_svm` runs SMO with maximal-violating-pair selection on
  the standard dual (box plus ``sum(alpha * y) == 0``, unregularized bias).

Decision values use ``f(x) >= 0`` for the positive branch.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

KERNELS = ("linear", "polynomial", "rbf")
DEFAULT_TOL = {"linear": 1e-4, "kernel": 1e-3}
KERNEL_CACHE_LIMIT = 2048


class SvmError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: float | None = None  # None: 1 / n_features, resolved at fit time
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError(f"degree must be an integer >= 1, got {self.degree}")

    def resolved(self, n_features):
        if self.gamma is not None:
            return self
        return KernelSpec(self.kind, 1.0 / n_features, self.degree, self.coef0)


@dataclass(frozen=True)
class SvmParams:
    C: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    max_iter: int = 100_000
    tol: float | None = None  # None: 1e-4 linear, 1e-3 kernel
    seed: int = 0

    def __post_init__(self):
        if not (self.C > 0 and math.isfinite(self.C)):
            raise ValueError(f"C must be a positive finite number, got {self.C}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")

    @property
    def effective_tol(self):
        if self.tol is not None:
            return self.tol
        return DEFAULT_TOL["linear" if self.kernel.kind == "linear" else "kernel"]


@dataclass(frozen=True, eq=False)
class LinearModel:
    """``f(x) = w . x + b``.

    ``alpha`` keeps the dual solution of the training run for diagnostics; it
    is not needed for prediction and is not serialized.
    """

    w: np.ndarray
    b: float
    iterations: int = 0
    converged: bool = True
    alpha: np.ndarray | None = None

    @property
    def n_features(self):
        return self.w.size

    def decision_function(self, X):
        return X @ self.w + self.b


@dataclass(frozen=True, eq=False)
class KernelModel:
    """``f(x) = sum_i alpha_y[i] * K(support[i], x) + b``."""

    support: np.ndarray
    alpha_y: np.ndarray
    b: float
    kernel: KernelSpec
    iterations: int = 0
    converged: bool = True
    alpha: np.ndarray | None = None
    n_features: int = 0

    def decision_function(self, X):
        if self.alpha_y.size == 0:
            return np.full(X.shape[0], self.b)
        return kernel_matrix(self.kernel, X, self.support) @ self.alpha_y + self.b


def kernel_eval(kernel, x, z):
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape or x.ndim != 1:
        raise SvmError(f"dimension mismatch: {x.shape} vs {z.shape}")
    return float(kernel_matrix(kernel, x[None, :], z[None, :])[0, 0])


def kernel_matrix(kernel, A, B):
    """Gram matrix ``K[i, j] = K(A[i], B[j])``."""
    if kernel.gamma is None:
        kernel = kernel.resolved(A.shape[1])
    dots = A @ B.T
    if kernel.kind == "linear":
        return dots
    if kernel.kind == "polynomial":
        return (kernel.gamma * dots + kernel.coef0) ** kernel.degree
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * dots
    return np.exp(-kernel.gamma * np.maximum(sq, 0.0))


def decision_value(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != model.n_features:
        raise SvmError(f"expected a vector of {model.n_features} features, got shape {x.shape}")
    return float(model.decision_function(x[None, :])[0])


def _check_problem(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise SvmError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise SvmError("non-finite input")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise SvmError("labels must be +1 / -1")
    if not ((y > 0).any() and (y < 0).any()):
        raise SvmError("both classes must be present")
    return X, y


@njit(cache=True, nogil=True)
def _splitmix_next(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _dual_cd(X, y, C, tol, max_epochs, seed):
    # Rows of X already carry the constant bias column.
    t, d = X.shape
    alpha = np.zeros(t)
    w = np.zeros(d)
    qdiag = np.empty(t)
    for i in range(t):
        s = 0.0
        for j in range(d):
            s += X[i, j] * X[i, j]
        qdiag[i] = s
    order = np.arange(t)
    state = np.uint64(seed)
    epoch = 0
    converged = False
    while epoch < max_epochs:
        epoch += 1
        for i in range(t - 1, 0, -1):
            state, r = _splitmix_next(state)
            k = np.int64(r % np.uint64(i + 1))
            order[i], order[k] = order[k], order[i]
        worst = 0.0
        for s in range(t):
            i = order[s]
            if qdiag[i] <= 0.0:
                continue
            g = 0.0
            for j in range(d):
                g += w[j] * X[i, j]
            g = y[i] * g - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            if abs(pg) > worst:
                worst = abs(pg)
            if pg != 0.0:
                na = min(max(a - g / qdiag[i], 0.0), C)
                delta = (na - a) * y[i]
                alpha[i] = na
                for j in range(d):
                    w[j] += delta * X[i, j]
        if worst < tol:
            # updates made during the pass may have moved earlier rows; confirm
            # the violation at the final iterate before stopping
            worst = 0.0
            for i in range(t):
                if qdiag[i] <= 0.0:
                    continue
                g = 0.0
                for j in range(d):
                    g += w[j] * X[i, j]
                g = y[i] * g - 1.0
                if alpha[i] <= 0.0:
                    g = min(g, 0.0)
                elif alpha[i] >= C:
                    g = max(g, 0.0)
                worst = max(worst, abs(g))
            if worst < tol:
                converged = True
                break
    return alpha, w, epoch, converged


def train_linear_svm(X, y, params):
    """Fit ``f(x) = w.x + b`` by dual coordinate descent.

    One iteration is one full pass over the rows in a seeded random order;
    training stops once the largest projected-gradient magnitude seen during
    a pass drops below ``params.tol``.
    """
    X, y = _check_problem(X, y)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    alpha, wa, epochs, converged = _dual_cd(
        Xa, y, float(params.C), float(params.effective_tol), int(params.max_iter), np.uint64(params.seed)
    )
    if not converged:
        warnings.warn(f"linear SVM did not converge in {epochs} epochs", RuntimeWarning, stacklevel=2)
    return LinearModel(wa[:-1].copy(), float(wa[-1]), int(epochs), bool(converged), alpha)


@njit(cache=True, nogil=True)
def _smo(K, y, C, tol, max_iter):
    t = y.size
    alpha = np.zeros(t)
    grad = -np.ones(t)  # gradient of 0.5 a'Qa - sum(a), Q = yy'K
    it = 0
    converged = False
    while it < max_iter:
        # maximal violating pair
        i = -1
        j = -1
        gmax = -np.inf
        gmin = np.inf
        for s in range(t):
            v = -y[s] * grad[s]
            up = (y[s] > 0 and alpha[s] < C) or (y[s] < 0 and alpha[s] > 0)
            low = (y[s] > 0 and alpha[s] > 0) or (y[s] < 0 and alpha[s] < C)
            if up and v > gmax:
                gmax = v
                i = s
            if low and v < gmin:
                gmin = v
                j = s
        if i < 0 or j < 0 or gmax - gmin < tol:
            converged = True
            break
        it += 1
        # move along y_i e_i - y_j e_j
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 1e-12:
            quad = 1e-12
        step = (gmax - gmin) / quad
        # respect the boxes of both variables
        if y[i] > 0:
            step = min(step, C - alpha[i])
        else:
            step = min(step, alpha[i])
        if y[j] > 0:
            step = min(step, alpha[j])
        else:
            step = min(step, C - alpha[j])
        ai = alpha[i] + y[i] * step
        aj = alpha[j] - y[j] * step
        ai = min(max(ai, 0.0), C)
        aj = min(max(aj, 0.0), C)
        di = ai - alpha[i]
        dj = aj - alpha[j]
        alpha[i] = ai
        alpha[j] = aj
        for s in range(t):
            grad[s] += y[s] * (y[i] * K[s, i] * di + y[j] * K[s, j] * dj)

    # bias from free vectors, else midpoint of the feasible interval
    total = 0.0
    nfree = 0
    ub = np.inf
    lb = -np.inf
    for s in range(t):
        v = -y[s] * grad[s]
        if 0.0 < alpha[s] < C:
            total += v
            nfree += 1
        else:
            up = (y[s] > 0 and alpha[s] < C) or (y[s] < 0 and alpha[s] > 0)
            if up:
                lb = max(lb, v)
            else:
                ub = min(ub, v)
    if nfree > 0:
        b = total / nfree
    elif np.isfinite(lb) and np.isfinite(ub):
        b = 0.5 * (lb + ub)
    elif np.isfinite(lb):
        b = lb
    elif np.isfinite(ub):
        b = ub
    else:
        b = 0.0
    return alpha, b, it, converged


def train_kernel_svm(X, y, params):
    """Fit a kernel SVM with SMO.

    ``max_iter`` bounds the number of pair updates. Support rows are exactly
    the training rows with a positive multiplier.
    """
    X, y = _check_problem(X, y)
    kernel = params.kernel.resolved(X.shape[1])
    if X.shape[0] <= KERNEL_CACHE_LIMIT:
        K = kernel_matrix(kernel, X, X)
    else:
        raise SvmError(f"kernel SVM limited to {KERNEL_CACHE_LIMIT} rows per problem")
    alpha, b, it, converged = _smo(
        np.ascontiguousarray(K), y, float(params.C), float(params.effective_tol), int(params.max_iter)
    )
    if not converged:
        warnings.warn(f"kernel SVM stopped after {it} SMO updates", RuntimeWarning, stacklevel=2)
    sv = alpha > 0
    return KernelModel(
        X[sv].copy(), (alpha * y)[sv], float(b), kernel, int(it), bool(converged), alpha, X.shape[1]
    )


def train_svm(X, y, params):
    if params.kernel.kind == "linear":
        return train_linear_svm(X, y, params)
    return train_kernel_svm(X, y, params)


def linear_dual_objective(X, y, alpha):
    """Dual objective of the bias-augmented linear problem."""
    Z = np.hstack([X, np.ones((X.shape[0], 1))]) * np.asarray(y, dtype=float)[:, None]
    v = Z.T @ alpha
    return float(alpha.sum() - 0.5 * v @ v)


def kernel_dual_objective(K, y, alpha):
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)
