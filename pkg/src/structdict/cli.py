"""Command-line entry point: ``python3 -m structdict <command> ...``."""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import bench
from .bench import ExperimentConfig, default_workers
from .classifier import Coding, evaluate
from .core import LabeledMatrix
from .data import SplitSpec, load_matrix, normalize_columns, save_matrix, train_test_split
from .errors import ConfigError, DataError, NumericalError

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from exc


def _train_count(text: str):
    v = float(text)
    return int(v) if v >= 1 and v == int(v) else v


def _add_data(p: argparse.ArgumentParser, required=True) -> None:
    p.add_argument("--data", required=required, help="sample matrix (.csv or SDLM binary)")
    p.add_argument("--labels", help="label file, one integer per line (binary files carry labels)")
    p.add_argument("--fmt", choices=("csv", "bin"), help="override format detection")
    p.add_argument("--orientation", choices=("columns", "rows"), default="columns",
                   help="CSV layout: one sample per column (default) or per row")


def _add_model(p: argparse.ArgumentParser, grid=False) -> None:
    num = _float_list if grid else float
    p.add_argument("--method", choices=bench.METHODS, default="esdl")
    p.add_argument("--atoms", type=int, default=40, help="dictionary size K")
    p.add_argument("--alpha", type=num, default=None if grid else 0.01)
    p.add_argument("--beta", type=num, default=None if grid else 1e-3)
    p.add_argument("--gamma", type=num, default=None if grid else 1e-3)
    p.add_argument("--lambda", dest="lam", type=float, default=1e-3, help="classifier ridge weight")
    p.add_argument("--max-iters", type=int, help="solver iteration cap (default 50, ADMM 200)")
    p.add_argument("--alt", default="half", help="mirror, half or file:PATH")
    p.add_argument("--meta", dest="meta_path", help="image size sidecar for --alt mirror")
    p.add_argument("--coding", default="omp:30", help="test-time coding: omp:T0 or ridge[:REG]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="scale samples to unit norm before training")
    p.add_argument("--workers", type=int, default=default_workers())


def _add_split(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-per-class", type=_train_count, default=20)
    p.add_argument("--pinned", type=int, default=0, help="leading samples per class always in train")


def _add_report(p: argparse.ArgumentParser) -> None:
    p.add_argument("--report", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="structdict", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a dictionary and classifier, save the model")
    _add_data(p)
    _add_model(p)
    p.add_argument("--model", required=True, help="output .npz path")

    p = sub.add_parser("evaluate", help="score a saved model on a test set")
    _add_data(p)
    p.add_argument("--model", required=True)
    p.add_argument("--coding", default=None, help="override the model's test-time coding")
    _add_report(p)

    p = sub.add_parser("benchmark", help="repeated split / train / test protocol")
    _add_data(p)
    _add_model(p)
    _add_split(p)
    p.add_argument("--repeats", type=int, default=10)
    _add_report(p)

    p = sub.add_parser("grid", help="cross-validated alpha/beta/gamma search on a training split")
    _add_data(p)
    _add_model(p, grid=True)
    _add_split(p)
    p.add_argument("--folds", type=int, default=5)
    _add_report(p)

    p = sub.add_parser("synth", help="write the union-of-subspaces fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="label file (CSV output only)")
    p.add_argument("--format", choices=("bin", "csv"), default="bin")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--subspace-dim", type=int, default=5)
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--mean-shift", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args, **extra) -> ExperimentConfig:
    cfg = ExperimentConfig(
        method=args.method, atoms=args.atoms, lam=args.lam, max_iters=args.max_iters,
        alt=args.alt, coding=args.coding, seed=args.seed, normalize=args.normalize,
        workers=args.workers, data_path=args.data, labels_path=args.labels, fmt=args.fmt,
        orientation=args.orientation, meta_path=args.meta_path, **extra,
    )
    if hasattr(args, "train_per_class"):
        cfg.split = SplitSpec(args.train_per_class, args.seed, args.pinned)
    return cfg


def _emit(args, report) -> None:
    if args.report:
        bench.emit_report(report, args.report, args.format)
    elif args.format == "csv":
        if not isinstance(report, bench.BenchmarkReport):
            raise ConfigError("csv output is only available for benchmark reports")
        sys.stdout.write(bench.summary_csv(report))
        sys.stdout.write(bench.confusion_csv(report))
    else:
        sys.stdout.write(bench.report_json(report))


def cmd_train(args) -> None:
    cfg = _config(args, alpha=args.alpha, beta=args.beta, gamma=args.gamma)
    cfg.validate()
    data, alt_source = bench.prepare_data(cfg, None)
    model = bench.fit(cfg, data, cfg.seed, alt_source)
    bench.save_model(model, args.model, data.label_names, cfg)
    for w in model.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"trained {cfg.method} K={cfg.atoms} in {model.train_seconds:.3f}s "
          f"({model.solver_iterations} iterations) -> {args.model}", file=sys.stderr)


def cmd_evaluate(args) -> None:
    dictionary, clf, names, meta = bench.load_model(args.model)
    raw = load_matrix(args.data, args.labels, fmt=args.fmt, orientation=args.orientation)
    index = {n: i for i, n in enumerate(names)}
    missing = sorted(set(raw.label_names) - set(index))
    if missing:
        raise DataError(f"test labels {missing} are unknown to the model")
    labels = np.array([index[raw.label_names[c]] for c in raw.labels], dtype=np.int64)
    test = LabeledMatrix(raw.data, labels, len(names), tuple(names))
    config = meta.get("config", {})
    if config.get("normalize", True):
        test = normalize_columns(test, log=[])
    coding = Coding.parse(args.coding or config.get("coding", "omp:30"))
    if coding.kind == "omp" and coding.sparsity > dictionary.n_atoms:
        coding = replace(coding, sparsity=dictionary.n_atoms)
    ev = evaluate(clf, dictionary, test, coding)
    _emit(args, {
        "accuracy": ev.accuracy,
        "confusion": ev.confusion,
        "class_names": names,
        "coding": str(coding),
        "test_seconds": ev.test_seconds,
        "test_seconds_per_sample": ev.per_sample_seconds,
        "model": meta,
    })


def cmd_benchmark(args) -> None:
    cfg = _config(args, alpha=args.alpha, beta=args.beta, gamma=args.gamma, repeats=args.repeats)
    _emit(args, bench.run_experiment(cfg))


def cmd_grid(args) -> None:
    cfg = _config(args)
    cfg.validate()
    data, _ = bench.prepare_data(cfg, None)
    if cfg.alt.startswith("file:"):
        raise ConfigError("grid search supports the mirror and half schemes only")
    train, _ = train_test_split(data, cfg.split, log=[])
    grid = {k: getattr(args, k) for k in ("alpha", "beta", "gamma") if getattr(args, k)}
    result = bench.grid_search(cfg, train, grid, args.folds)
    _emit(args, result)


def cmd_synth(args) -> None:
    Y = bench.make_synthetic(args.classes, args.dim, args.subspace_dim, args.per_class,
                             args.noise, args.seed, args.mean_shift)
    if args.format == "csv" and not args.labels:
        raise ConfigError("CSV output needs --labels")
    save_matrix(Y, args.out, args.labels, fmt=args.format)


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
    "grid": cmd_grid,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
