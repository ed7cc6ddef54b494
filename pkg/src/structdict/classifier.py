"""Ridge-regression linear classifier on representation coefficients."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .coding import OmpParams, omp_code_batch, ridge_code
from .core import LabeledMatrix, as_array
from .errors import ConfigError, ConformanceError, DataError, NumericalError


@dataclass(frozen=True)
class LinearClassifier:
    weights: np.ndarray  # C x K
    lam: float

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Coding:
    """How test samples are coded: ``omp`` with ``sparsity``, or ``ridge`` with ``reg``."""

    kind: str = "omp"
    sparsity: int = 30
    reg: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("omp", "ridge"):
            raise ConfigError(f"unknown coding mode {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Coding":
        """``omp``, ``omp:T0``, ``ridge`` or ``ridge:REG``."""
        kind, _, arg = text.partition(":")
        try:
            if kind == "omp":
                return cls("omp", sparsity=int(arg) if arg else 30)
            if kind == "ridge":
                return cls("ridge", reg=float(arg) if arg else 1e-3)
        except ValueError:
            pass
        raise ConfigError(f"cannot parse coding mode {text!r}")

    def __str__(self) -> str:
        return f"omp:{self.sparsity}" if self.kind == "omp" else f"ridge:{self.reg:g}"

    def encode(self, D, Y) -> np.ndarray:
        if self.kind == "omp":
            return omp_code_batch(D, Y, OmpParams(sparsity=self.sparsity))
        return ridge_code(D, as_array(Y), self.reg)


def train_classifier(X, H, lam: float = 1e-3) -> LinearClassifier:
    """W = H X' (X X' + lam I)^-1."""
    X, H = as_array(X), as_array(H)
    if X.shape[1] != H.shape[1]:
        raise ConformanceError(f"X {X.shape} and H {H.shape}: column counts differ")
    if lam < 0:
        raise ConfigError("lambda must be nonnegative")
    A = X @ X.T
    A[np.diag_indices_from(A)] += lam
    if lam == 0 and np.linalg.cond(A) > 1e12:
        raise NumericalError("X X' is singular; train the classifier with lambda > 0")
    W = np.linalg.solve(A, X @ H.T).T
    return LinearClassifier(W, lam)


def predict(model: LinearClassifier, x) -> int:
    """Class with the largest score in W x; ties go to the lowest index."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.weights.shape[1]:
        raise ConformanceError(f"code length {x.shape[0]} vs {model.weights.shape[1]} atoms")
    if not np.all(np.isfinite(x)):
        raise DataError("coefficient vector contains NaN or Inf")
    return int(np.argmax(model.weights @ x))


def predict_batch(model: LinearClassifier, X) -> np.ndarray:
    X = as_array(X)
    if not np.all(np.isfinite(X)):
        raise DataError("coefficients contain NaN or Inf")
    return np.argmax(model.weights @ X, axis=0)


@dataclass
class Evaluation:
    accuracy: float
    confusion: np.ndarray  # rows: true class, columns: predicted class
    test_seconds: float
    workers: int = 1

    @property
    def per_sample_seconds(self) -> float:
        n = int(self.confusion.sum())
        return self.test_seconds / n if n else 0.0


def evaluate(model: LinearClassifier, D, Y_test: LabeledMatrix,
             coding: Coding | None = None) -> Evaluation:
    """Code each test column, predict, and tally a confusion matrix."""
    coding = coding or Coding()
    if Y_test.n_samples == 0:
        raise DataError("test set is empty")
    C = model.class_count
    if Y_test.labels.max() >= C:
        raise DataError(f"test label {int(Y_test.labels.max())} unknown to a {C}-class model")
    t0 = time.perf_counter()
    X = coding.encode(D, Y_test)
    pred = predict_batch(model, X)
    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (Y_test.labels, pred), 1)
    elapsed = time.perf_counter() - t0
    return Evaluation(float(np.trace(confusion)) / Y_test.n_samples, confusion, elapsed)
