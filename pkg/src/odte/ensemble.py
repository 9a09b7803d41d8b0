"""ODTE: bagged STrees with majority voting, plus JSON model files."""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import bootstrap
from .rng import check_seed, mix
from .stree import Internal, Leaf, StreeParams, build_tree, node_count, predict_tree_batch, tree_depth
from .svm import KernelModel, KernelSpec, LinearModel, SvmParams

SCHEMA_VERSION = 1


class ModelFileError(ValueError):
    """The model file cannot be turned back into an ensemble."""


class SchemaMismatchError(ModelFileError):
    pass


@dataclass(frozen=True)
class OdteParams:
    n_trees: int = 100
    base: StreeParams = field(default_factory=StreeParams)
    bootstrap_size: int | None = None  # None: same as the number of training rows
    max_features: int | None = None
    seed: int = 57

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.bootstrap_size is not None and self.bootstrap_size < 1:
            raise ValueError(f"bootstrap_size must be >= 1, got {self.bootstrap_size}")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError(f"max_features must be >= 1, got {self.max_features}")
        check_seed(self.seed)

    def tree_params(self, tree_seed):
        base = self.base
        if self.max_features is not None:
            base = replace(base, max_features=self.max_features)
        return replace(base, seed=mix(tree_seed, 0))


@dataclass(frozen=True, eq=False)
class Ensemble:
    trees: tuple
    vocabulary: tuple
    params: OdteParams
    per_tree_seeds: tuple
    n_features: int
    feature_names: tuple = ()
    schema_version: int = SCHEMA_VERSION
    # (mean, scale) applied to raw inputs before routing, when set
    input_scaling: tuple | None = None

    def votes(self, X):
        X = _check_rows(X, self.n_features)
        if self.input_scaling is not None:
            mean, scale = self.input_scaling
            X = (X - mean) / scale
        counts = np.zeros((X.shape[0], len(self.vocabulary)), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            counts[rows, predict_tree_batch(tree, X)] += 1
        return counts


def _check_rows(X, n_features):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, n_features)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected rows of {n_features} features, got shape {X.shape}")
    return X


def identity_sampler(dataset, size, seed):
    """Sampler hook that hands every tree the full dataset unchanged."""
    return dataset.view()


def fit_ensemble(dataset, params, threads=1, sampler=bootstrap):
    """Train ``params.n_trees`` trees, each on its own bootstrap sample.

    Tree ``i`` draws everything from ``mix(params.seed, i)``, so the result
    does not depend on ``threads`` or on scheduling.
    """
    size = params.bootstrap_size or dataset.m
    seeds = tuple(mix(params.seed, i) for i in range(params.n_trees))

    def fit_one(seed):
        view = sampler(dataset, size, seed)
        return build_tree(view.X, view.y, dataset.k, params.tree_params(seed))[0]

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = tuple(pool.map(fit_one, seeds))
    else:
        trees = tuple(fit_one(s) for s in seeds)
    return Ensemble(trees, dataset.vocabulary, params, seeds, dataset.n, dataset.feature_names)


def predict_batch(ensemble, X):
    """Majority vote per row; ties go to the lowest vocabulary index."""
    return np.argmax(ensemble.votes(X), axis=1) if len(X) else np.empty(0, dtype=np.int64)


def predict_ensemble(ensemble, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict_ensemble expects a single feature vector")
    return int(predict_batch(ensemble, x[None, :])[0])


def ensemble_size_stats(ensemble):
    per_tree = [node_count(t) for t in ensemble.trees]
    return {
        "mean_nodes": float(np.mean(per_tree)),
        "max_depth_observed": max(tree_depth(t) for t in ensemble.trees),
        "per_tree_nodes": per_tree,
    }


# --- serialization ---------------------------------------------------------


def _model_to_json(model):
    if isinstance(model, LinearModel):
        return {"kind": "linear", "w": model.w.tolist(), "b": model.b}
    k = model.kernel
    return {
        "kind": "kernel",
        "kernel": {"kind": k.kind, "gamma": k.gamma, "degree": k.degree, "coef0": k.coef0},
        "sv": model.support.tolist(),
        "alpha_y": model.alpha_y.tolist(),
        "b": model.b,
    }


def _model_from_json(d, n_features):
    if d["kind"] == "linear":
        w = np.array(d["w"], dtype=np.float64)
        if w.shape != (n_features,):
            raise ModelFileError("linear weights do not match the feature subset")
        return LinearModel(w, float(d["b"]))
    if d["kind"] == "kernel":
        kernel = KernelSpec(**d["kernel"])
        sv = np.array(d["sv"], dtype=np.float64).reshape(-1, n_features)
        alpha_y = np.array(d["alpha_y"], dtype=np.float64)
        if alpha_y.shape != (sv.shape[0],):
            raise ModelFileError("support vectors and coefficients differ in length")
        return KernelModel(sv, alpha_y, float(d["b"]), kernel, n_features=n_features)
    raise ModelFileError(f"unknown model kind {d['kind']!r}")


def node_to_json(node):
    if isinstance(node, Leaf):
        return {"kind": "leaf", "label": node.label, "counts": list(node.counts)}
    return {
        "kind": "internal",
        "ig": node.ig,
        "model": _model_to_json(node.model),
        "feature_subset": list(node.feature_subset),
        "pos": node_to_json(node.positive),
        "neg": node_to_json(node.negative),
    }


def node_from_json(d, depth=0, n_inputs=None):
    if d["kind"] == "leaf":
        return Leaf(int(d["label"]), tuple(int(c) for c in d["counts"]), depth)
    if d["kind"] != "internal":
        raise ModelFileError(f"unknown node kind {d['kind']!r}")
    subset = tuple(int(j) for j in d["feature_subset"])
    if n_inputs is not None and subset and not 0 <= min(subset) <= max(subset) < n_inputs:
        raise ModelFileError("feature subset outside the model's feature range")
    return Internal(
        _model_from_json(d["model"], len(subset)),
        subset,
        node_from_json(d["pos"], depth + 1, n_inputs),
        node_from_json(d["neg"], depth + 1, n_inputs),
        float(d["ig"]),
        depth,
        n_inputs,
    )


def params_from_dict(d):
    base = dict(d["base"])
    svm = dict(base.pop("svm"))
    svm["kernel"] = KernelSpec(**svm["kernel"])
    base["svm"] = SvmParams(**svm)
    return OdteParams(**{**d, "base": StreeParams(**base)})


def ensemble_to_dict(ensemble):
    d = {
        "schema_version": ensemble.schema_version,
        "vocabulary": list(ensemble.vocabulary),
        "n_features": ensemble.n_features,
        "feature_names": list(ensemble.feature_names),
        "params": asdict(ensemble.params),
        "per_tree_seeds": list(ensemble.per_tree_seeds),
        "trees": [node_to_json(t) for t in ensemble.trees],
    }
    if ensemble.input_scaling is not None:
        mean, scale = ensemble.input_scaling
        d["standardizer"] = {"mean": mean.tolist(), "scale": scale.tolist()}
    return d


def ensemble_from_dict(d):
    if not isinstance(d, dict) or "schema_version" not in d:
        raise ModelFileError("missing schema_version")
    if d["schema_version"] != SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"unsupported schema_version {d['schema_version']!r} (expected {SCHEMA_VERSION})"
        )
    try:
        n_features = int(d["n_features"])
        trees = tuple(node_from_json(t, 0, n_features) for t in d["trees"])
        params = params_from_dict(d["params"])
        scaling = None
        if "standardizer" in d:
            st = d["standardizer"]
            scaling = (np.array(st["mean"], dtype=np.float64), np.array(st["scale"], dtype=np.float64))
        return Ensemble(
            trees,
            tuple(d["vocabulary"]),
            params,
            tuple(int(s) for s in d["per_tree_seeds"]),
            n_features,
            tuple(d.get("feature_names", ())),
            input_scaling=scaling,
        )
    except ModelFileError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ModelFileError(f"corrupted model payload: {exc}") from exc


def dumps(ensemble):
    return json.dumps(ensemble_to_dict(ensemble), separators=(",", ":"))


def save_model(ensemble, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(ensemble))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"corrupted model payload: {exc}") from exc
    return ensemble_from_dict(payload)
