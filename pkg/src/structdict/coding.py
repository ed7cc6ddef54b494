"""Sparse-coding primitives: orthogonal matching pursuit and the l1 prox."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_array
from .errors import ConfigError, ConformanceError, DataError

_NORM_CHECK_TOL = 1e-8


@dataclass(frozen=True)
class OmpParams:
    sparsity: int = 30
    residual_tol: float = 1e-6

    def __post_init__(self):
        if self.sparsity < 1:
            raise ConfigError("OMP sparsity must be at least 1")
        if self.residual_tol < 0:
            raise ConfigError("residual_tol must be nonnegative")


def _check_dictionary(D: np.ndarray, p: OmpParams) -> None:
    if p.sparsity > D.shape[1]:
        raise ConfigError(
            f"OMP sparsity {p.sparsity} exceeds the {D.shape[1]} available atoms"
        )
    norms = np.linalg.norm(D, axis=0)
    if np.any(np.abs(norms - 1.0) > _NORM_CHECK_TOL):
        raise DataError("OMP requires a dictionary with unit-norm atoms")


def _omp(D: np.ndarray, y: np.ndarray, p: OmpParams, trace: list | None = None) -> np.ndarray:
    K = D.shape[1]
    x = np.zeros(K)
    residual = y.copy()
    res_norm = np.linalg.norm(residual)
    if trace is not None:
        trace.append(res_norm)
    support: list[int] = []
    while len(support) < p.sparsity and res_norm > p.residual_tol:
        corr = np.abs(D.T @ residual)
        corr[support] = -1.0
        k = int(np.argmax(corr))
        if corr[k] <= 0.0:
            break
        support.append(k)
        # lstsq is SVD based: minimum-norm answer on collinear supports
        coef = np.linalg.lstsq(D[:, support], y, rcond=None)[0]
        residual = y - D[:, support] @ coef
        res_norm = np.linalg.norm(residual)
        if trace is not None:
            trace.append(res_norm)
    if support:
        x[support] = coef
    return x


def omp_code(D, y, p: OmpParams, trace: list | None = None) -> np.ndarray:
    """Code one sample over unit-norm atoms with at most ``p.sparsity`` nonzeros.

    Each step picks the atom with the largest absolute correlation with the
    residual (lowest index on ties) and refits every selected coefficient by
    least squares. If ``trace`` is given, the residual norm before the first
    and after each step is appended to it.
    """
    D = as_array(D)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != D.shape[0]:
        raise ConformanceError(f"sample length {y.shape[0]} vs dictionary rows {D.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise DataError("sample contains NaN or Inf")
    _check_dictionary(D, p)
    return _omp(D, y, p, trace)


def omp_code_batch(D, Y, p: OmpParams) -> np.ndarray:
    """Column-wise :func:`omp_code`; returns the K x N coefficient matrix."""
    D = as_array(D)
    Y = as_array(Y)
    if Y.shape[0] != D.shape[0]:
        raise ConformanceError(f"Y {Y.shape} and D {D.shape}: row counts differ")
    if not np.all(np.isfinite(Y)):
        raise DataError("samples contain NaN or Inf")
    _check_dictionary(D, p)
    X = np.zeros((D.shape[1], Y.shape[1]))
    for i in range(Y.shape[1]):
        X[:, i] = _omp(D, Y[:, i], p)
    return X


def ridge_code(D, Y, reg: float) -> np.ndarray:
    """Dense alternative to OMP: argmin_x ||y - Dx||^2 + reg*||x||^2 per column."""
    D = as_array(D)
    Y = np.asarray(as_array(Y), dtype=np.float64)
    if reg <= 0:
        raise ConfigError("ridge coding needs a positive regularizer")
    G = D.T @ D
    G[np.diag_indices_from(G)] += reg
    return np.linalg.solve(G, D.T @ Y.reshape(D.shape[0], -1)).reshape(
        (D.shape[1],) + Y.shape[1:]
    )


def soft_threshold(M, tau: float) -> np.ndarray:
    """Elementwise max(m - tau, 0) + min(m + tau, 0)."""
    if tau < 0:
        raise ConfigError("soft-threshold level must be nonnegative")
    M = np.asarray(M, dtype=np.float64)
    return np.maximum(M - tau, 0.0) + np.minimum(M + tau, 0.0)
