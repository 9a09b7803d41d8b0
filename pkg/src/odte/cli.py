"""Command line entry point: ``odte {fit,predict,cv,tune,compare}``.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

import argparse
import csv
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import DataError, Standardizer, load_csv
from .ensemble import (
    ModelFileError,
    OdteParams,
    ensemble_size_stats,
    fit_ensemble,
    load_model,
    predict_batch,
    save_model,
)
from .evaluation import (
    DEFAULT_FOLDS,
    DEFAULT_REPETITIONS,
    apply_overrides,
    compare,
    cross_validate,
    default_seeds,
    grid_search,
    read_matrix_csv,
)
from .stree import StreeParams
from .svm import KernelSpec, SvmParams

log = logging.getLogger("odte")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def _optional_int(text):
    if text.lower() in ("none", "unlimited", "all"):
        return None
    return _positive_int(text)


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _add_common(p, data=True):
    if data:
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--label-column", default="last", help='header name or "last"')
        p.add_argument("--no-header", action="store_true", help="CSV has no header row")
    p.add_argument("--seed", type=_seed, default=57)
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--out", help="output path (file or prefix, per command)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_model_flags(p):
    g = p.add_argument_group("tree")
    g.add_argument("--C", type=float, default=1.0)
    g.add_argument("--kernel", choices=("linear", "polynomial", "poly", "rbf"), default="linear")
    g.add_argument("--gamma", type=float, default=None)
    g.add_argument("--degree", type=int, default=3)
    g.add_argument("--coef0", type=float, default=0.0)
    g.add_argument("--strategy", choices=("ovo", "ovr"), default="ovo")
    g.add_argument("--splitter", choices=("best", "random"), default="random")
    g.add_argument("--max-depth", type=_optional_int, default=None)
    g.add_argument("--min-samples-split", type=int, default=2)
    g.add_argument("--max-iter", type=_positive_int, default=100_000)
    g.add_argument("--tol", type=float, default=None)
    g = p.add_argument_group("ensemble")
    g.add_argument("--n-trees", type=_positive_int, default=100)
    g.add_argument("--max-features", type=_optional_int, default=None)
    g.add_argument("--bootstrap-size", type=_optional_int, default=None)
    p.add_argument("--standardize", action="store_true", help="z-score features per training split")


def params_from_args(args):
    """Build :class:`OdteParams`; invalid values raise :class:`UsageError`."""
    kind = "polynomial" if args.kernel == "poly" else args.kernel
    try:
        svm = SvmParams(
            C=args.C,
            kernel=KernelSpec(kind, args.gamma, args.degree, args.coef0),
            max_iter=args.max_iter,
            tol=args.tol,
        )
        base = StreeParams(
            svm=svm,
            multiclass_strategy=args.strategy,
            max_depth=args.max_depth,
            min_samples_split=args.min_samples_split,
            splitter=args.splitter,
        )
        return OdteParams(
            n_trees=args.n_trees,
            base=base,
            bootstrap_size=args.bootstrap_size,
            max_features=args.max_features,
            seed=args.seed,
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _load(args):
    label = args.label_column
    if label.lstrip("-").isdigit():
        label = int(label)
    return load_csv(args.data, label, not args.no_header)


def _write_text(path, text):
    Path(path).write_text(text, encoding="utf-8")


def _emit(text, out):
    if out:
        _write_text(out, text)
    else:
        sys.stdout.write(text)


def cmd_fit(args):
    params = params_from_args(args)
    if not args.out:
        raise UsageError("fit needs --out for the model file")
    ds = _load(args)
    start = time.perf_counter()
    scaler = None
    if args.standardize:
        scaler = Standardizer().fit(ds.features)
        ds = ds.replace_features(scaler.transform(ds.features))
    ens = fit_ensemble(ds, params, threads=args.threads)
    if scaler is not None:
        ens = replace(ens, input_scaling=(scaler.mean_, scaler.scale_))
    elapsed = time.perf_counter() - start
    save_model(ens, args.out)
    size = ensemble_size_stats(ens)
    summary = {
        "model": str(args.out),
        "n_trees": len(ens.trees),
        "mean_nodes": size["mean_nodes"],
        "max_depth_observed": size["max_depth_observed"],
    }
    if not args.no_timing:
        summary["wall_time_seconds"] = elapsed
    print(json.dumps(summary))


def _read_features(path, ens, label_column):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        return np.empty((0, ens.n_features))
    header = [h.strip() for h in rows[0]]
    names = list(ens.feature_names)
    if names and all(n in header for n in names):
        cols = [header.index(n) for n in names]
        rows = rows[1:]
    else:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
        cols = None
    X = np.empty((len(rows), ens.n_features))
    for i, row in enumerate(rows, start=1):
        if cols is None:
            if label_column == "last" and len(row) == ens.n_features + 1:
                row = row[:-1]
            if len(row) != ens.n_features:
                raise DataError(
                    f"{path}: row {i} has {len(row)} feature cells, model expects {ens.n_features}"
                )
            cells = row
        else:
            cells = [row[c] if c < len(row) else "" for c in cols]
        try:
            X[i - 1] = [float(c) for c in cells]
        except ValueError:
            raise DataError(f"{path}: non-numeric or missing value in row {i}") from None
    return X


def cmd_predict(args):
    ens = load_model(args.model)
    X = _read_features(args.data, ens, args.label_column)
    labels = predict_batch(ens, X)
    _emit("".join(f"{ens.vocabulary[i]}\n" for i in labels), args.out)


def cmd_cv(args):
    params = params_from_args(args)
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    if args.seeds:
        seeds = [_seed(s) for s in args.seeds.split(",")]
        if len(seeds) != args.repetitions:
            raise UsageError(f"--seeds needs {args.repetitions} values, got {len(seeds)}")
    else:
        seeds = default_seeds(args.seed, args.repetitions)
    ds = _load(args)
    report = cross_validate(
        ds, params, args.repetitions, args.folds, seeds, args.standardize, threads=args.threads
    )
    summary = json.dumps(report.summary(timing=not args.no_timing), indent=2)
    if args.out:
        _write_text(f"{args.out}.folds.csv", report.to_csv())
        _write_text(f"{args.out}.summary.json", summary + "\n")
    if args.csv:
        sys.stdout.write(report.to_csv())
    else:
        print(summary)


def _load_grid(spec):
    p = Path(spec)
    text = p.read_text(encoding="utf-8") if p.exists() else spec
    try:
        grid = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"grid is not valid JSON: {exc}") from None
    if not isinstance(grid, dict) or not grid:
        raise UsageError("grid must be a non-empty JSON object of flag -> list of values")
    for k, v in grid.items():
        if not isinstance(v, list) or not v:
            raise UsageError(f"grid entry {k!r} must be a non-empty list")
    return grid


def cmd_tune(args):
    grid = _load_grid(args.grid)
    params = params_from_args(args)
    try:
        for combo in [{k: v[0]} for k, v in grid.items()]:
            apply_overrides(params, combo)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"bad grid: {exc}") from None
    ds = _load(args)
    result = grid_search(ds, grid, (args.repetitions, args.folds), args.seed, params)
    out = {"best": result.best_overrides, "table": result.table}
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        _write_text(args.out, text)
    if args.csv:
        keys = list(grid) + ["score"]
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(keys)
        for row in result.table:
            w.writerow([row[k] for k in keys])
    else:
        sys.stdout.write(text)


def cmd_compare(args):
    matrix, algorithms, datasets = read_matrix_csv(args.data)
    if args.control is not None and args.control not in algorithms:
        raise UsageError(f"control {args.control!r} is not one of {algorithms}")
    report = compare(matrix, algorithms, datasets, args.control, args.alpha)
    if args.out:
        _write_text(f"{args.out}.csv", report.to_csv())
        _write_text(f"{args.out}.json", report.to_json() + "\n")
    if args.csv:
        sys.stdout.write(report.to_csv())
    else:
        print(report.to_json())


def build_parser():
    parser = argparse.ArgumentParser(prog="odte", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train an ensemble and write the model JSON")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--no-timing", action="store_true", help="omit wall time from output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict labels for a feature CSV")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="repeated stratified cross-validation")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--repetitions", type=_positive_int, default=DEFAULT_REPETITIONS)
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    p.add_argument("--seeds", help="comma-separated base seeds, one per repetition")
    p.add_argument("--csv", action="store_true", help="print per-fold CSV instead of JSON")
    p.add_argument("--no-timing", action="store_true", help="omit wall time from output")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("tune", help="grid search over tree hyperparameters")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--grid", required=True, help="JSON object (or file) of flag -> values")
    p.add_argument("--repetitions", type=_positive_int, default=1)
    p.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("compare", help="Friedman + Holm comparison of an accuracy matrix")
    _add_common(p)
    p.add_argument("--control", help="control algorithm (default: best ranked)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.verbose == 0:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"odte {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"odte {args.command}: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_RUNTIME
    except (DataError, ModelFileError, ValueError, OSError) as exc:
        print(f"odte {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
