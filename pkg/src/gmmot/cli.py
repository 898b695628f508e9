"""Command-line entry point: ``gmmot {fit,dist,classify,eval,selftest}``.

Exit codes: 0 success, 1 selftest failure, 2 usage or input error,
3 computation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import checks
from .classifier import (
    METHODS,
    ClassModelSet,
    EvalProtocol,
    LabeledChunk,
    classify_chunk,
    evaluate,
    evaluate_sweep,
    fit_class_models,
)
from .errors import DimensionMismatch, GmmotError, MalformedModel
from .io import InputError, format_records, read_table
from .mixture import FitConfig, fit, load_model, save_model
from .transport import build_cost_matrix, gmm_wasserstein

EXIT_OK, EXIT_SELFTEST, EXIT_INPUT, EXIT_COMPUTE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _name_list(choices):
    def parse(text):
        names = [t.strip() for t in text.split(",") if t.strip()]
        bad = [n for n in names if n not in choices]
        if not names or bad:
            raise argparse.ArgumentTypeError(f"choose from {', '.join(choices)}")
        return names
    return parse


def _int_list(text):
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _fit_flags(p):
    g = p.add_argument_group("mixture fitting")
    g.add_argument("--n-components", type=_positive_int, default=1)
    g.add_argument("--covariance", choices=["full", "diag"], default="full")
    g.add_argument("--reg-eps", type=_positive_float, default=None,
                   help="diagonal loading (default: 1e-6 x mean data variance)")
    g.add_argument("--tol", type=_positive_float, default=1e-6)
    g.add_argument("--max-iter", type=_positive_int, default=200)
    g.add_argument("--restarts", type=_positive_int, default=1)


def _common_flags(p, fmt=True):
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--output", default="-", help="output path ('-' for standard output)")
    if fmt:
        p.add_argument("--format", choices=["json", "csv"], default="json")


def _fit_config(args) -> FitConfig:
    return FitConfig(
        n_components=args.n_components,
        covariance_type="diagonal" if args.covariance == "diag" else "full",
        reg_eps=args.reg_eps,
        tol=args.tol,
        max_iter=args.max_iter,
        n_restarts=args.restarts,
        seed=args.seed,
    )


@contextmanager
def _open_output(target):
    if target in (None, "-"):
        yield sys.stdout
    else:
        with open(target, "w", encoding="utf-8") as fh:
            yield fh


def _emit(records, args):
    with _open_output(args.output) as fh:
        fh.write(format_records(records, args.format))


def _load_model_file(path):
    try:
        return load_model(Path(path).read_bytes())
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc})") from None
    except MalformedModel as exc:
        raise InputError(f"{path}: {exc}") from None


# --- commands -----------------------------------------------------------------


def cmd_fit(args):
    if args.output == "-":
        raise UsageError("fit needs --output (a model path, or a directory with --per-label)")
    table = read_table(args.input, label_column=args.label_column, require_label=args.per_label)
    config = _fit_config(args)
    if args.per_label:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        models = fit_class_models(table.features, table.labels, config)
        for label, model in models.models.items():
            (out / f"{label}.json").write_bytes(save_model(model))
        record = {"labels": models.labels, "output": str(out)}
    else:
        model, report = fit(table.features, config)
        Path(args.output).write_bytes(save_model(model))
        record = {"output": args.output, "n_components": model.n_components, "dim": model.dim,
                  **report.to_dict()}
    print(json.dumps(record))
    return EXIT_OK


def cmd_dist(args):
    p = _load_model_file(args.model_a)
    q = _load_model_file(args.model_b)
    if p.dim != q.dim:
        raise InputError(f"model dimensions differ: {p.dim} vs {q.dim}")
    distance, plan = gmm_wasserstein(p, q, args.cost)
    record = {"distance": distance, "cost": args.cost}
    if args.verbose:
        record["plan"] = plan.flows.tolist()
        record["cost_matrix"] = build_cost_matrix(p, q).tolist()
    _emit([record], args)
    return EXIT_OK


def _load_class_models(directory, config) -> ClassModelSet:
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"{directory}: not a directory of model files")
    files = sorted(directory.glob("*.json"))
    if not files:
        raise InputError(f"{directory}: no *.json model files")
    try:
        return ClassModelSet({f.stem: _load_model_file(f) for f in files}, config)
    except DimensionMismatch as exc:
        raise InputError(f"{directory}: {exc}") from None


def cmd_classify(args):
    config = _fit_config(args)
    models = _load_class_models(args.models, config)
    table = read_table(args.chunks, chunk_column=args.chunk_column, label_column=args.label_column,
                       require_chunk=True)
    if table.features.shape[1] != models.dim:
        raise InputError(f"{args.chunks}: {table.features.shape[1]} feature columns, models have dimension {models.dim}")
    records, ok = [], 0
    for chunk_id in sorted(set(table.chunk_ids.tolist())):
        rows = table.features[table.chunk_ids == chunk_id]
        try:
            result = classify_chunk(models, LabeledChunk(rows, chunk_id), config, cost=args.cost)
        except GmmotError as exc:
            records.append({"chunk_id": chunk_id, "error": str(exc)})
            continue
        ok += 1
        records.append(result.to_record())
    _emit(records, args)
    return EXIT_OK if ok else EXIT_COMPUTE


def cmd_eval(args):
    table = read_table(args.input, label_column=args.label_column, require_label=True)
    config = _fit_config(args)
    if args.chunk_size < config.n_components:
        raise UsageError("--chunk-size must be at least --n-components")
    protocol = EvalProtocol(folds=args.folds, repetitions=args.repetitions, chunk_size=args.chunk_size,
                            seed=args.seed, k_neighbors=args.k_neighbors)
    report = evaluate(table.features, table.labels, protocol, config, args.methods, args.cost)
    records = [{"record": "run", **r} for r in report.rows]
    records += [{"record": "summary", **s} for s in report.summary()]
    records += [{"record": "failure", **f} for f in report.failures]
    _emit(records, args)
    if args.sweep:
        if not args.sweep_values:
            raise UsageError("--sweep needs --sweep-values")
        points = evaluate_sweep(table.features, table.labels, protocol, config, args.methods,
                                args.sweep, args.sweep_values, args.cost)
        with _open_output(args.plot_output) as fh:
            fh.write(format_records(points, args.format))
    return EXIT_OK


def cmd_selftest(args):
    fault = checks.unrooted_distance if args.inject_fault else None
    failed = False
    for name in args.suites:
        result = checks.SELFTEST_SUITES[name](args.seed, fault)
        print(result.line())
        for line in result.failures[:5]:
            print(f"    {line}")
        failed |= not result.passed
    print("selftest: " + ("FAIL" if failed else "PASS"))
    return EXIT_SELFTEST if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmmot", description=(
        "Summarise datasets as Gaussian mixtures and compare them with a "
        "component-level 2-Wasserstein distance."))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a mixture to a CSV/TSV file")
    p.add_argument("input")
    p.add_argument("--label-column", default=None)
    p.add_argument("--per-label", action="store_true", help="fit one model per label into --output DIR")
    _fit_flags(p)
    _common_flags(p, fmt=False)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("dist", help="distance between two model files")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--cost", choices=["squared", "linear"], default="squared")
    p.add_argument("--verbose", action="store_true", help="include the plan and cost matrix")
    _common_flags(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("classify", help="label chunks by their nearest class model")
    p.add_argument("models", help="directory of <label>.json model files")
    p.add_argument("chunks")
    p.add_argument("--chunk-column", default="chunk")
    p.add_argument("--label-column", default=None, help="ignored column holding true labels, if any")
    p.add_argument("--cost", choices=["squared", "linear"], default="squared")
    _fit_flags(p)
    _common_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", help="repeated stratified k-fold chunk classification")
    p.add_argument("input")
    p.add_argument("--label-column", default="label")
    p.add_argument("--methods", type=_name_list(METHODS), default=["gmm_wasserstein"])
    p.add_argument("--chunk-size", type=_positive_int, default=100)
    p.add_argument("--folds", type=_positive_int, default=2)
    p.add_argument("--repetitions", type=_positive_int, default=5)
    p.add_argument("--k-neighbors", type=_positive_int, default=5)
    p.add_argument("--cost", choices=["squared", "linear"], default="squared")
    p.add_argument("--sweep", choices=["chunk_size", "n_components"], default=None)
    p.add_argument("--sweep-values", type=_int_list, default=None)
    p.add_argument("--plot-output", default="-", help="destination of the sweep table")
    _fit_flags(p)
    _common_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftest", help="run reduced oracle suites")
    p.add_argument("--suites", type=_name_list(list(checks.SELFTEST_SUITES)),
                   default=list(checks.SELFTEST_SUITES))
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "eval" and args.folds < 2:
        parser.error("--folds must be at least 2")
    try:
        return args.func(args)
    except (InputError, UsageError) as exc:
        print(f"gmmot {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GmmotError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"gmmot {args.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
