"""STree: oblique decision trees with an SVM hyperplane at every split.

At each node the multiclass problem over the labels present is reduced to
binary subproblems (one-vs-one or one-vs-rest). One SVM is trained per
subproblem, each is applied to *every* row reaching the node, and the one
whose two-way partition has the highest information gain becomes the node
test. Rows with ``f(x) >= 0`` go to the positive child.
"""

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .rng import check_seed, generator, mix
from .svm import SvmParams, train_svm

STRATEGIES = ("ovo", "ovr")
SPLITTERS = ("best", "random")
# child-seed indices reserved next to the per-candidate ones
SELECT_STREAM = 1 << 20
FEATURE_STREAM = 1 << 21
GAIN_EPS = 1e-12


@dataclass(frozen=True)
class StreeParams:
    svm: SvmParams = field(default_factory=SvmParams)
    multiclass_strategy: str = "ovo"
    max_depth: int | None = None
    min_samples_split: int = 2
    splitter: str = "random"
    max_features: int | None = None
    purity_threshold: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.multiclass_strategy not in STRATEGIES:
            raise ValueError(f"multiclass_strategy must be one of {STRATEGIES}")
        if self.splitter not in SPLITTERS:
            raise ValueError(f"splitter must be one of {SPLITTERS}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ValueError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError(f"max_features must be >= 1, got {self.max_features}")
        if not 0.0 < self.purity_threshold <= 1.0:
            raise ValueError(f"purity_threshold must be in (0, 1], got {self.purity_threshold}")
        check_seed(self.seed)


@dataclass(frozen=True, eq=False)
class Leaf:
    label: int
    counts: tuple
    depth: int = 0


@dataclass(frozen=True, eq=False)
class Internal:
    model: object
    feature_subset: tuple
    positive: object
    negative: object
    ig: float
    depth: int = 0
    n_inputs: int | None = None  # width of the rows the tree was grown on


@dataclass(frozen=True)
class Candidate:
    """One binary subproblem. ``positive`` / ``negative`` are label indices."""

    index: int
    positive: int
    negative: tuple


@dataclass(frozen=True)
class CandidateScore:
    index: int
    ig: float
    partition_sizes: tuple


def entropy(labels):
    """Shannon entropy in bits."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("entropy of an empty label sequence")
    _, counts = np.unique(labels, return_counts=True)
    return _entropy_counts(counts)


def _entropy_counts(counts):
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(max(0.0, -(p * np.log2(p)).sum()))


def _gain_counts(parent, pos, neg):
    t = parent.sum()
    tp = pos.sum()
    tn = neg.sum()
    child = (tp / t) * _entropy_counts(pos) + (tn / t) * _entropy_counts(neg)
    gain = _entropy_counts(parent) - child
    # rounding noise on a gain-free partition must not count as a split
    return gain if gain > GAIN_EPS else 0.0


def information_gain(parent, pos, neg):
    """Parent entropy minus the size-weighted entropy of the two sides."""
    parent = np.asarray(parent)
    pos = np.asarray(pos, dtype=parent.dtype)
    neg = np.asarray(neg, dtype=parent.dtype)
    if parent.size == 0:
        raise ValueError("information gain of an empty parent")
    if not np.array_equal(np.sort(parent), np.sort(np.concatenate([pos, neg]))):
        raise ValueError("pos and neg do not partition parent")
    vals, inv = np.unique(parent, return_inverse=True)
    k = vals.size
    pc = np.bincount(inv, minlength=k)
    pp = np.bincount(np.searchsorted(vals, pos), minlength=k)
    nc = np.bincount(np.searchsorted(vals, neg), minlength=k)
    return _gain_counts(pc, pp, nc)


def enumerate_candidates(labels, strategy):
    """Binary subproblems for the labels present, in vocabulary order.

    With exactly two labels present a single candidate is returned whatever
    the strategy, the lower label index being positive.
    """
    present = [int(c) for c in np.unique(labels)]
    if len(present) < 2:
        raise ValueError("need at least two distinct labels to split")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if len(present) == 2:
        return [Candidate(0, present[0], (present[1],))]
    if strategy == "ovo":
        return [Candidate(j, a, (b,)) for j, (a, b) in enumerate(combinations(present, 2))]
    return [
        Candidate(j, c, tuple(o for o in present if o != c)) for j, c in enumerate(present)
    ]


def select_split(scores, splitter="best", seed=0):
    """Index (into ``scores``) of the chosen candidate.

    ``best`` takes the highest gain, lowest index on ties. ``random`` draws
    uniformly among candidates with positive gain and falls back to ``best``
    when there are none.
    """
    if not scores:
        raise ValueError("no candidates to select from")
    gains = np.array([s.ig for s in scores])
    if splitter == "random":
        positive = np.flatnonzero(gains > 0)
        if positive.size:
            return int(positive[generator(seed).integers(positive.size)])
    elif splitter != "best":
        raise ValueError(f"unknown splitter {splitter!r}")
    return int(np.argmax(gains))


def _mode(counts):
    return int(np.argmax(counts))


class TreeBuilder:
    """Grows one tree; keeps counters used by diagnostics and tests."""

    def __init__(self, params, n_classes):
        self.params = params
        self.k = n_classes
        self.n_svm_fits = 0
        self._node_id = 0

    def _train(self, X, y, seed):
        self.n_svm_fits += 1
        return train_svm(X, y, replace(self.params.svm, seed=seed))

    def evaluate_candidate(self, X, y, cand, seed):
        """Train the candidate SVM and score the partition it induces on all rows."""
        if self.params.multiclass_strategy == "ovo" and len(cand.negative) == 1:
            rows = (y == cand.positive) | (y == cand.negative[0])
        else:
            rows = np.ones(y.size, dtype=bool)
        target = np.where(y[rows] == cand.positive, 1.0, -1.0)
        model = self._train(X[rows], target, seed)
        goes_pos = model.decision_function(X) >= 0
        pc = np.bincount(y, minlength=self.k)
        pp = np.bincount(y[goes_pos], minlength=self.k)
        ig = _gain_counts(pc, pp, pc - pp)
        npos = int(goes_pos.sum())
        return model, CandidateScore(cand.index, ig, (npos, y.size - npos)), goes_pos

    def build(self, X, y, depth=0, feature_subset=None):
        p = self.params
        if feature_subset is None:
            feature_subset = tuple(range(X.shape[1]))
        node_id = self._node_id
        self._node_id += 1
        counts = np.bincount(y, minlength=self.k)
        t = y.size
        leaf = Leaf(_mode(counts), tuple(int(c) for c in counts), depth)
        if (
            counts.max() >= p.purity_threshold * t
            or (p.max_depth is not None and depth >= p.max_depth)
            or t < p.min_samples_split
        ):
            return leaf

        node_seed = mix(p.seed, node_id)
        Xs = X[:, feature_subset]
        results = [
            self.evaluate_candidate(Xs, y, cand, mix(node_seed, cand.index))
            for cand in enumerate_candidates(y, p.multiclass_strategy)
        ]
        scores = [r[1] for r in results]
        best = select_split(scores, p.splitter, mix(node_seed, SELECT_STREAM))
        model, score, goes_pos = results[best]
        if not score.ig > 0 or goes_pos.all() or not goes_pos.any():
            return leaf
        return Internal(
            model,
            tuple(feature_subset),
            self.build(X[goes_pos], y[goes_pos], depth + 1, feature_subset),
            self.build(X[~goes_pos], y[~goes_pos], depth + 1, feature_subset),
            score.ig,
            depth,
            X.shape[1],
        )


def build(view, params):
    """Grow a tree on the rows of ``view``."""
    return build_tree(view.X, view.y, view.parent.k, params)[0]


def build_tree(X, y, n_classes, params):
    """Grow a tree on arrays; returns ``(root, builder)``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("cannot grow a tree on zero rows")
    builder = TreeBuilder(params, n_classes)
    subset = None
    n = X.shape[1]
    if params.max_features is not None and params.max_features < n:
        rng = generator(mix(params.seed, FEATURE_STREAM))
        subset = tuple(int(j) for j in np.sort(rng.choice(n, params.max_features, replace=False)))
    return builder.build(X, y, 0, subset), builder


def predict_tree(root, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict_tree expects a single feature vector")
    return int(predict_tree_batch(root, x[None, :])[0])


def predict_tree_batch(root, X):
    """Route every row of ``X`` to a leaf and return the leaf labels."""
    X = np.asarray(X, dtype=np.float64)
    if isinstance(root, Internal):
        width = root.n_inputs if root.n_inputs is not None else max(root.feature_subset) + 1
        if X.ndim != 2 or (X.shape[1] != width if root.n_inputs is not None else X.shape[1] < width):
            raise ValueError(f"dimension mismatch: tree expects {width} features, got shape {X.shape}")
    out = np.empty(X.shape[0], dtype=np.int64)
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if isinstance(node, Leaf):
            out[rows] = node.label
            continue
        if rows.size == 0:
            continue
        sub = X[rows][:, list(node.feature_subset)]
        if sub.shape[1] != node.model.n_features:
            raise ValueError(
                f"dimension mismatch: node expects {node.model.n_features} features"
            )
        goes_pos = node.model.decision_function(sub) >= 0
        stack.append((node.positive, rows[goes_pos]))
        stack.append((node.negative, rows[~goes_pos]))
    return out


def iter_nodes(root):
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Internal):
            stack.append(node.negative)
            stack.append(node.positive)


def node_count(root):
    return sum(1 for _ in iter_nodes(root))


def tree_depth(root):
    return max(node.depth for node in iter_nodes(root))
