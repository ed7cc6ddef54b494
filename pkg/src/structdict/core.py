"""Shared data model and the objective evaluators used by both solvers.

Coefficient matrices (X, and the ADMM auxiliaries Z and L) and the ideal
matrix Q are plain ``float64`` ndarrays of shape (K, N). Samples and
dictionaries carry label metadata and get small frozen dataclasses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ConformanceError, DataError

UNIT_NORM_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LabeledMatrix:
    """Samples stored column-wise (n x N) with an integer class id per column.

    ``label_names`` maps a remapped id back to the id found on disk and
    ``ids`` records which column of the originally loaded matrix each
    column came from, so splits can be checked for disjointness.
    """

    data: np.ndarray
    labels: np.ndarray
    class_count: int
    label_names: tuple = ()
    ids: np.ndarray | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, ndmin=2, copy=True)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if data.ndim != 2:
            raise DataError(f"sample matrix must be 2-D, got shape {data.shape}")
        if labels.shape[0] != data.shape[1]:
            raise DataError(
                f"{labels.shape[0]} labels for {data.shape[1]} sample columns"
            )
        if not np.all(np.isfinite(data)):
            raise DataError("sample matrix contains NaN or Inf")
        C = int(self.class_count)
        if C < 1:
            raise DataError("class_count must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= C):
            raise DataError(f"labels must lie in 0..{C - 1}")
        names = tuple(self.label_names) if self.label_names else tuple(range(C))
        if len(names) != C:
            raise DataError(f"{len(names)} label names for {C} classes")
        ids = np.arange(data.shape[1]) if self.ids is None else np.array(self.ids, dtype=np.int64)
        if ids.shape != labels.shape:
            raise DataError("column ids must match the column count")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "class_count", C)
        object.__setattr__(self, "label_names", names)
        object.__setattr__(self, "ids", _frozen(ids))

    @property
    def n_features(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def require_all_classes(self) -> None:
        missing = np.flatnonzero(self.class_sizes() == 0)
        if missing.size:
            raise DataError(f"classes {missing.tolist()} have no samples")

    def take(self, columns) -> "LabeledMatrix":
        columns = np.asarray(columns, dtype=np.int64)
        return LabeledMatrix(
            self.data[:, columns],
            self.labels[columns],
            self.class_count,
            self.label_names,
            self.ids[columns],
        )

    def with_data(self, data: np.ndarray) -> "LabeledMatrix":
        """Same labels and identities, different column contents."""
        return LabeledMatrix(data, self.labels, self.class_count, self.label_names, self.ids)

    def label_matrix(self) -> np.ndarray:
        """One-hot C x N label matrix H."""
        H = np.zeros((self.class_count, self.n_samples))
        H[self.labels, np.arange(self.n_samples)] = 1.0
        return H


def label_matrix(labels: Sequence[int], class_count: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    H = np.zeros((class_count, labels.size))
    H[labels, np.arange(labels.size)] = 1.0
    return H


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Unit-norm atoms (n x K) with a class label per atom, grouped by class."""

    atoms: np.ndarray
    atom_labels: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=np.float64, ndmin=2, copy=True)
        labels = np.array(self.atom_labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != atoms.shape[1]:
            raise ConformanceError(
                f"{labels.shape[0]} atom labels for {atoms.shape[1]} atoms"
            )
        if not np.all(np.isfinite(atoms)):
            raise DataError("dictionary contains NaN or Inf")
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise DataError("dictionary atoms must have unit l2 norm")
        if labels.size and np.any(np.diff(labels) < 0):
            raise DataError("atoms must be grouped contiguously by class")
        object.__setattr__(self, "atoms", _frozen(atoms))
        object.__setattr__(self, "atom_labels", _frozen(labels))

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class EsdlParams:
    alpha: float = 0.01
    beta: float = 1e-3
    gamma: float = 1e-3
    max_iters: int = 50
    tol: float = 1e-6

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ConfigError("alpha, beta and gamma must be nonnegative")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")

    @classmethod
    def face(cls, **kw) -> "EsdlParams":
        return cls(alpha=0.01, beta=1e-3, gamma=1e-3, **kw)

    @classmethod
    def scene(cls, **kw) -> "EsdlParams":
        return cls(alpha=0.1, beta=1e-4, gamma=1e-4, **kw)


@dataclass
class SolverReport:
    objective_trace: list = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False
    train_seconds: float = 0.0
    warnings: list = field(default_factory=list)
    # ADMM only
    primal_residual_trace: list = field(default_factory=list)
    mu_trace: list = field(default_factory=list)


def as_array(x) -> np.ndarray:
    """Unwrap LabeledMatrix/Dictionary to their matrix, pass arrays through."""
    if isinstance(x, LabeledMatrix):
        return x.data
    if isinstance(x, Dictionary):
        return x.atoms
    return np.asarray(x, dtype=np.float64)


def check_conformance(Y, Y_alter, D, X, Q) -> None:
    n, N = Y.shape
    if Y_alter.shape != Y.shape:
        raise ConformanceError(f"Y {Y.shape} and Y_alter {Y_alter.shape} differ")
    if D.shape[0] != n:
        raise ConformanceError(f"D {D.shape} and Y {Y.shape}: row counts differ")
    K = D.shape[1]
    if X.shape != (K, N):
        raise ConformanceError(f"D {D.shape} and X {X.shape}: expected X of shape {(K, N)}")
    if Q.shape != X.shape:
        raise ConformanceError(f"X {X.shape} and Q {Q.shape} differ")


def _fit_terms(Y, Y_alter, D, X, Q, p: EsdlParams):
    Y, Y_alter, D, X, Q = map(as_array, (Y, Y_alter, D, X, Q))
    check_conformance(Y, Y_alter, D, X, Q)
    DX = D @ X
    fit = np.sum((Y - DX) ** 2) + p.alpha * np.sum((Y_alter - DX) ** 2)
    return fit + p.gamma * np.sum((X - Q) ** 2), X


def esdl_objective(Y, Y_alter, D, X, Q, p: EsdlParams) -> float:
    """||Y-DX||^2 + a||Y_alter-DX||^2 + b||X||^2 + g||X-Q||^2 (Frobenius)."""
    value, X = _fit_terms(Y, Y_alter, D, X, Q, p)
    return float(value + p.beta * np.sum(X**2))


def sdl_l1_objective(Y, Y_alter, D, X, Q, p: EsdlParams) -> float:
    """Same as :func:`esdl_objective` with the ridge term replaced by b*sum|X|."""
    value, X = _fit_terms(Y, Y_alter, D, X, Q, p)
    return float(value + p.beta * np.sum(np.abs(X)))


def build_ideal_matrix(sample_labels, atom_labels) -> np.ndarray:
    """Binary K x N matrix with a one wherever atom and sample share a class."""
    sample_labels = np.asarray(sample_labels, dtype=np.int64).reshape(-1)
    atom_labels = np.asarray(atom_labels, dtype=np.int64).reshape(-1)
    if sample_labels.size == 0 or atom_labels.size == 0:
        raise ConfigError("ideal matrix needs non-empty sample and atom labels")
    if min(sample_labels.min(), atom_labels.min()) < 0:
        raise ConfigError("labels must be nonnegative class ids")
    return (atom_labels[:, None] == sample_labels[None, :]).astype(np.float64)
