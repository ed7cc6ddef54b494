"""Experiment protocol: repeated splits, cross-validated grid search, reports."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifier import Coding, LinearClassifier, evaluate, train_classifier
from .core import Dictionary, EsdlParams, LabeledMatrix
from .data import (
    ImageMeta,
    SplitSpec,
    half_split_alternative,
    load_matrix,
    mirror_samples,
    normalize_columns,
    train_test_split,
)
from .errors import ConfigError, DataError, NumericalError, StructDictError
from .esdl import esdl_train
from .ksvd import KsvdParams, ksvd_train
from .sdl_l1 import AdmmParams, sdl_l1_train

METHODS = ("esdl", "sdl_l1", "ksvd_baseline")
DEFAULT_GRID = (1e-4, 1e-3, 0.01, 0.1)
TIMING_CONVENTION = "train_seconds includes K-SVD initialization and classifier fitting; excludes I/O"
TIMING_FIELDS = ("train_seconds_mean", "test_seconds_mean", "test_seconds_per_sample_mean",
                 "per_repeat_train_seconds", "per_repeat_test_seconds")


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("STRUCTDICT_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass
class ExperimentConfig:
    method: str = "esdl"
    atoms: int = 40
    alpha: float = 0.01
    beta: float = 1e-3
    gamma: float = 1e-3
    lam: float = 1e-3
    max_iters: int | None = None  # None: solver default (50 ESDL, 200 ADMM)
    tol: float = 1e-6
    primal_tol: float = 1e-6
    init_iterations: int = 10
    init_sparsity: int | None = None
    split: SplitSpec = field(default_factory=SplitSpec)
    repeats: int = 1
    alt: str = "half"  # mirror | half | file:PATH
    coding: str = "omp:30"
    seed: int = 0
    normalize: bool = True
    workers: int = field(default_factory=default_workers)
    data_path: str | None = None
    labels_path: str | None = None
    fmt: str | None = None
    orientation: str = "columns"
    meta_path: str | None = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if self.atoms < 1:
            raise ConfigError("atoms must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if not (self.alt in ("mirror", "half") or self.alt.startswith("file:")):
            raise ConfigError(f"alt must be mirror, half or file:PATH, got {self.alt!r}")
        if self.alt == "mirror" and not self.meta_path:
            raise ConfigError("the mirror scheme needs an image metadata file")
        Coding.parse(self.coding)
        self.esdl_params()

    def esdl_params(self) -> EsdlParams:
        if self.method == "sdl_l1":
            return AdmmParams(alpha=self.alpha, beta=self.beta, gamma=self.gamma,
                              max_iters=self.max_iters or 200, tol=self.tol,
                              primal_tol=self.primal_tol)
        return EsdlParams(alpha=self.alpha, beta=self.beta, gamma=self.gamma,
                          max_iters=self.max_iters or 50, tol=self.tol)

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("workers")  # reports must not depend on the worker count
        return d


@dataclass
class TrainedModel:
    dictionary: Dictionary
    classifier: LinearClassifier
    method: str
    train_seconds: float
    solver_iterations: int
    warnings: list


@dataclass
class BenchmarkReport:
    per_repeat_accuracy: list
    mean_accuracy: float
    train_seconds_mean: float
    test_seconds_mean: float
    test_seconds_per_sample_mean: float
    confusion: np.ndarray
    class_names: list
    config: dict
    warnings: list
    per_repeat_train_seconds: list = field(default_factory=list)
    per_repeat_test_seconds: list = field(default_factory=list)
    failed_repeats: list = field(default_factory=list)
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        d["confusion"] = np.asarray(self.confusion).tolist()
        d["timing_convention"] = TIMING_CONVENTION
        return d


def without_timing(report: dict) -> dict:
    """Copy of a report dict with wall-clock fields removed, for reproducibility checks."""
    return {k: v for k, v in report.items() if k not in TIMING_FIELDS}


# --- synthetic fixture ----------------------------------------------------------

def make_synthetic(classes: int = 10, dim: int = 64, subspace_dim: int = 5, per_class: int = 40,
                   noise: float = 0.05, seed: int = 0, mean_shift: float = 0.0) -> LabeledMatrix:
    """Union-of-subspaces data: per class a random orthonormal basis times Gaussian weights.

    With the default ``mean_shift=0`` every class is symmetric about the
    origin. Odd coders (OMP, ridge) followed by a linear argmax rule then
    cannot beat 50% accuracy, since y and -y get opposite scores.
    A positive ``mean_shift`` adds that constant to every weight, giving
    classes a consistent sign pattern, as nonnegative image data has.
    """
    if classes < 1 or dim < 1 or subspace_dim < 1 or subspace_dim > dim:
        raise ConfigError("need classes >= 1 and 1 <= subspace_dim <= dim")
    if per_class < 2:
        raise ConfigError("need at least two samples per class")
    if noise < 0:
        raise ConfigError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    blocks = []
    for _ in range(classes):
        basis, _ = np.linalg.qr(rng.standard_normal((dim, subspace_dim)))
        blocks.append(basis @ (rng.standard_normal((subspace_dim, per_class)) + mean_shift))
    data = np.hstack(blocks)
    data += noise * rng.standard_normal(data.shape)
    return LabeledMatrix(data, np.repeat(np.arange(classes), per_class), classes)


# --- one training / evaluation run -----------------------------------------------

def load_dataset(cfg: ExperimentConfig) -> LabeledMatrix:
    if not cfg.data_path:
        raise ConfigError("no dataset path given")
    return load_matrix(cfg.data_path, cfg.labels_path, fmt=cfg.fmt, orientation=cfg.orientation)


def _alternative_source(cfg: ExperimentConfig, data: LabeledMatrix) -> LabeledMatrix | None:
    """For ``file:PATH`` load the alternative matrix, column-aligned with ``data``."""
    if not cfg.alt.startswith("file:"):
        return None
    alt = load_matrix(cfg.alt[5:], None, fmt=cfg.fmt, orientation=cfg.orientation)
    if alt.data.shape != data.data.shape:
        raise DataError(f"alternative samples {alt.data.shape} vs data {data.data.shape}")
    return data.with_data(alt.data)


def build_alternative(cfg: ExperimentConfig, train: LabeledMatrix, seed: int,
                      alt_source: LabeledMatrix | None, log: list):
    if cfg.alt == "half":
        return half_split_alternative(train, seed, log=log)
    if cfg.alt == "mirror":
        return train, mirror_samples(train, ImageMeta.read(cfg.meta_path))
    if alt_source is None:
        raise ConfigError("file:PATH scheme without loaded alternative samples")
    pos = {int(i): k for k, i in enumerate(alt_source.ids)}
    cols = [pos[int(i)] for i in train.ids]
    return train, train.with_data(alt_source.data[:, cols])


def _baseline_dictionary(Y: LabeledMatrix, K: int, init: KsvdParams) -> Dictionary:
    """Global K-SVD; atoms labelled by the class that loads them most, then grouped."""
    if K % Y.class_count:
        raise ConfigError(f"K={K} is not divisible by the {Y.class_count} classes")
    D, X, _ = ksvd_train(Y.data, replace(init, atoms=K))
    mass = np.abs(X) @ Y.label_matrix().T  # K x C
    labels = np.argmax(mass, axis=1)
    order = np.argsort(labels, kind="stable")
    return Dictionary(D[:, order], labels[order])


def fit(cfg: ExperimentConfig, train: LabeledMatrix, seed: int = 0,
        alt_source: LabeledMatrix | None = None) -> TrainedModel:
    """Train the configured method plus its linear classifier on ``train``."""
    log: list = []
    init = KsvdParams(sparsity=cfg.init_sparsity, iterations=cfg.init_iterations, seed=seed)
    t0 = time.perf_counter()
    if cfg.method == "ksvd_baseline":
        dictionary = _baseline_dictionary(train, cfg.atoms, init)
        codes = _coding(cfg, cfg.atoms, log).encode(dictionary, train)
        H = train.label_matrix()
        iterations = cfg.init_iterations
    else:
        Y, Y_alter = build_alternative(cfg, train, seed, alt_source, log)
        solver = sdl_l1_train if cfg.method == "sdl_l1" else esdl_train
        model = solver(Y, Y_alter, cfg.atoms, cfg.esdl_params(), init)
        log += model.report.warnings
        dictionary, codes, H = model.dictionary, model.coefficients, Y.label_matrix()
        iterations = model.report.iterations_run
    clf = train_classifier(codes, H, cfg.lam)
    return TrainedModel(dictionary, clf, cfg.method, time.perf_counter() - t0, iterations, log)


def _coding(cfg: ExperimentConfig, K: int, log: list) -> Coding:
    coding = Coding.parse(cfg.coding)
    if coding.kind == "omp" and coding.sparsity > K:
        log.append(f"OMP sparsity {coding.sparsity} clipped to the {K} atoms")
        coding = replace(coding, sparsity=K)
    return coding


def _repeat_seeds(seed: int, repeats: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(repeats)]


def _run_repeat(cfg: ExperimentConfig, data: LabeledMatrix, alt_source, seed: int) -> dict:
    log: list = []
    train, test = train_test_split(data, replace(cfg.split, seed=seed), log=log)
    model = fit(cfg, train, seed, alt_source)
    log += model.warnings
    ev = evaluate(model.classifier, model.dictionary, test,
                  _coding(cfg, model.dictionary.n_atoms, log))
    return dict(accuracy=ev.accuracy, confusion=ev.confusion, train_seconds=model.train_seconds,
                test_seconds=ev.test_seconds, per_sample=ev.per_sample_seconds, warnings=log)


def _pmap(fn, items, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def prepare_data(cfg: ExperimentConfig, data: LabeledMatrix | None):
    if data is None:
        data = load_dataset(cfg)
    alt_source = _alternative_source(cfg, data)
    if cfg.normalize:
        data = normalize_columns(data, log=[])
        if alt_source is not None:
            alt_source = normalize_columns(alt_source, log=[])
    if cfg.atoms % data.class_count:
        raise ConfigError(f"K={cfg.atoms} is not divisible by the {data.class_count} classes")
    return data, alt_source


def run_experiment(cfg: ExperimentConfig, data: LabeledMatrix | None = None) -> BenchmarkReport:
    """Repeat split / train / evaluate ``cfg.repeats`` times and aggregate."""
    cfg.validate()
    data, alt_source = prepare_data(cfg, data)
    seeds = _repeat_seeds(cfg.seed, cfg.repeats)

    def one(seed):
        try:
            return _run_repeat(cfg, data, alt_source, seed)
        except (StructDictError, np.linalg.LinAlgError) as exc:
            return exc

    results = _pmap(one, seeds, cfg.workers)
    ok = [r for r in results if isinstance(r, dict)]
    failed = [i for i, r in enumerate(results) if not isinstance(r, dict)]
    warnings = []
    for i, r in enumerate(results):
        if isinstance(r, dict):
            warnings += [f"repeat {i}: {w}" for w in r["warnings"]]
        else:
            warnings.append(f"repeat {i} failed: {type(r).__name__}: {r}")
    if 2 * len(failed) > cfg.repeats or not ok:
        first = results[failed[0]]
        if isinstance(first, (ConfigError, DataError, NumericalError)):
            raise type(first)(f"{len(failed)} of {cfg.repeats} repeats failed; first: {first}")
        raise NumericalError(f"{len(failed)} of {cfg.repeats} repeats failed; first: {first}")
    acc = [r["accuracy"] for r in ok]
    return BenchmarkReport(
        per_repeat_accuracy=acc,
        mean_accuracy=float(np.mean(acc)),
        train_seconds_mean=float(np.mean([r["train_seconds"] for r in ok])),
        test_seconds_mean=float(np.mean([r["test_seconds"] for r in ok])),
        test_seconds_per_sample_mean=float(np.mean([r["per_sample"] for r in ok])),
        confusion=sum(r["confusion"] for r in ok),
        class_names=list(data.label_names),
        config=cfg.echo(),
        warnings=warnings,
        per_repeat_train_seconds=[r["train_seconds"] for r in ok],
        per_repeat_test_seconds=[r["test_seconds"] for r in ok],
        failed_repeats=failed,
        workers=cfg.workers,
    )


# --- cross-validation ---------------------------------------------------------------

@dataclass
class GridResult:
    best: tuple
    scores: dict  # (alpha, beta, gamma) -> mean fold accuracy
    folds: int

    def to_dict(self) -> dict:
        return {
            "best": dict(zip(("alpha", "beta", "gamma"), self.best)),
            "folds": self.folds,
            "cells": [
                {"alpha": a, "beta": b, "gamma": g, "mean_accuracy": s}
                for (a, b, g), s in sorted(self.scores.items())
            ],
        }


def stratified_folds(Y: LabeledMatrix, folds: int, seed: int) -> list[np.ndarray]:
    """Column-index arrays, one per fold, each holding every class."""
    if folds < 2:
        raise ConfigError("need at least two folds")
    sizes = Y.class_sizes()
    if sizes.min() < folds:
        raise ConfigError(
            f"a class has only {int(sizes.min())} training samples; use at most that many folds"
        )
    rng = np.random.default_rng(seed)
    out: list[list[int]] = [[] for _ in range(folds)]
    for c in range(Y.class_count):
        idx = rng.permutation(np.flatnonzero(Y.labels == c))
        for pos, col in enumerate(idx):
            out[pos % folds].append(int(col))
    return [np.sort(np.array(f)) for f in out]


def grid_search(cfg: ExperimentConfig, train: LabeledMatrix, grid: dict | None = None,
                folds: int = 5) -> GridResult:
    """Stratified k-fold search over alpha/beta/gamma using ``train`` only.

    Ties go to the lexicographically smallest (alpha, beta, gamma).
    """
    grid = grid or {}
    cells = sorted(itertools.product(*(sorted(grid.get(k, DEFAULT_GRID))
                                       for k in ("alpha", "beta", "gamma"))))
    fold_idx = stratified_folds(train, folds, cfg.seed)
    parts = []
    for f, held in enumerate(fold_idx):
        rest = np.sort(np.concatenate([g for i, g in enumerate(fold_idx) if i != f]))
        fit_part, val_part = train.take(rest), train.take(held)
        assert not set(fit_part.ids.tolist()) & set(val_part.ids.tolist())
        parts.append((fit_part, val_part))

    def score(cell):
        a, b, g = cell
        c = replace(cfg, alpha=a, beta=b, gamma=g)
        accs = []
        for f, (fit_part, val_part) in enumerate(parts):
            model = fit(c, fit_part, cfg.seed + f)
            ev = evaluate(model.classifier, model.dictionary, val_part,
                          _coding(c, model.dictionary.n_atoms, []))
            accs.append(ev.accuracy)
        return float(np.mean(accs))

    scores = dict(zip(cells, _pmap(score, cells, cfg.workers)))
    best = cells[0]
    for cell in cells[1:]:
        if scores[cell] > scores[best]:
            best = cell
    return GridResult(best, scores, folds)


# --- reports ---------------------------------------------------------------------

def _round(obj):
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.6g}")
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def report_json(report) -> str:
    d = report.to_dict() if hasattr(report, "to_dict") else report
    return json.dumps(_round(d), sort_keys=True, indent=2) + "\n"


def confusion_csv(report: BenchmarkReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.class_names)
    w.writerows(np.asarray(report.confusion).tolist())
    return buf.getvalue()


def summary_csv(report: BenchmarkReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["repeat", "accuracy", "train_seconds", "test_seconds"])
    rows = zip(report.per_repeat_accuracy, report.per_repeat_train_seconds,
               report.per_repeat_test_seconds)
    for i, row in enumerate(rows):
        w.writerow([i] + [f"{v:.6g}" for v in row])
    w.writerow(["mean", f"{report.mean_accuracy:.6g}", f"{report.train_seconds_mean:.6g}",
                f"{report.test_seconds_mean:.6g}"])
    return buf.getvalue()


def confusion_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_confusion.csv")


def emit_report(report, path, fmt: str = "json") -> None:
    """Write ``report`` deterministically.

    ``json`` writes one document. ``csv`` writes a per-repeat summary table at
    ``path`` and the confusion matrix next to it (``<stem>_confusion.csv``).
    """
    path = Path(path)
    try:
        if fmt == "json":
            path.write_text(report_json(report))
        elif fmt == "csv":
            if not isinstance(report, BenchmarkReport):
                raise ConfigError("csv output is only available for benchmark reports")
            path.write_text(summary_csv(report))
            confusion_path(path).write_text(confusion_csv(report))
        else:
            raise ConfigError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise DataError(f"cannot write report to {path}: {exc}") from exc


# --- model persistence -------------------------------------------------------------

def save_model(model: TrainedModel, path, class_names, cfg: ExperimentConfig) -> None:
    try:
        with open(path, "wb") as fh:
            np.savez(fh, atoms=model.dictionary.atoms, atom_labels=model.dictionary.atom_labels,
                     weights=model.classifier.weights, lam=model.classifier.lam,
                     class_names=np.asarray(class_names, dtype=np.int64),
                     meta=json.dumps({"method": model.method, "config": _round(cfg.echo()),
                                      "train_seconds": model.train_seconds}, sort_keys=True))
    except OSError as exc:
        raise DataError(f"cannot write model to {path}: {exc}") from exc


def load_model(path):
    """Return ``(dictionary, classifier, class_names, meta)``."""
    try:
        with np.load(path, allow_pickle=False) as z:
            d = Dictionary(z["atoms"], z["atom_labels"])
            clf = LinearClassifier(z["weights"], float(z["lam"]))
            names = [int(v) for v in z["class_names"]]
            meta = json.loads(str(z["meta"]))
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    return d, clf, names, meta
