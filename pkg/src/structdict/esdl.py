"""Alternating closed-form solver for the structured ridge dictionary objective."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .core import (
    Dictionary,
    EsdlParams,
    LabeledMatrix,
    SolverReport,
    as_array,
    build_ideal_matrix,
    esdl_objective,
)
from .errors import ConfigError, ConformanceError, NumericalError
from .ksvd import KsvdParams, init_dictionary_per_class

COND_LIMIT = 1e12
JITTER = 1e-10


@dataclass
class EsdlModel:
    dictionary: Dictionary
    coefficients: np.ndarray
    params: object
    report: SolverReport


def _warn(report: SolverReport | None, msg: str) -> None:
    # each distinct message once; iterations repeat the same condition
    if report is not None and msg not in report.warnings:
        report.warnings.append(msg)


def _cholesky(G: np.ndarray):
    """Cholesky factor of G, or None when G is not numerically positive definite.

    Conditioning is judged by LAPACK's 1-norm estimate from the factor, which
    costs far less than an SVD.
    """
    try:
        factor = linalg.cho_factor(G, check_finite=False)
    except linalg.LinAlgError:
        return None
    rcond, info = lapack.dpocon(factor[0], np.abs(G).sum(axis=0).max(),
                                uplo="L" if factor[1] else "U")
    if info != 0 or not rcond * COND_LIMIT >= 1.0:
        return None
    return factor


def solve_spd(G: np.ndarray, B: np.ndarray, report: SolverReport | None = None,
              *, singular_ok: bool = True, ridge: float = 0.0) -> np.ndarray:
    """Solve G X = B for symmetric positive (semi)definite G with one Cholesky.

    Ill-conditioned G gets a diagonal jitter of 1e-10 * trace(G)/K, unless
    ``singular_ok`` is False, in which case NumericalError is raised.
    ``ridge`` is a known lower bound on the eigenvalues of G; when
    trace(G)/ridge already bounds the condition number below the limit the
    estimate is skipped.
    """
    K = G.shape[0]
    if ridge > 0 and np.trace(G) <= COND_LIMIT * ridge:
        factor = linalg.cho_factor(G, check_finite=False)
    else:
        factor = _cholesky(G)
    if factor is None:
        if not singular_ok:
            raise NumericalError(
                "coefficient system is singular; use beta + gamma > 0"
            )
        G = G + (JITTER * np.trace(G) / K) * np.eye(K)
        _warn(report, "Gram matrix ill-conditioned; added jitter to the diagonal")
        try:
            factor = linalg.cho_factor(G, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NumericalError(f"Cholesky factorization failed: {exc}") from exc
    return linalg.cho_solve(factor, B, check_finite=False)


def _check_pair(Y, Y_alter):
    if Y.shape != Y_alter.shape:
        raise ConformanceError(f"Y {Y.shape} and Y_alter {Y_alter.shape} differ")


def update_coefficients(D, Y, Y_alter, Q, p: EsdlParams,
                        report: SolverReport | None = None) -> np.ndarray:
    """X = ((1+a) D'D + (b+g) I)^-1 (D'Y + a D'Y_alter + g Q)."""
    D, Y, Y_alter, Q = map(as_array, (D, Y, Y_alter, Q))
    _check_pair(Y, Y_alter)
    if D.shape[0] != Y.shape[0]:
        raise ConformanceError(f"D {D.shape} and Y {Y.shape}: row counts differ")
    if Q.shape != (D.shape[1], Y.shape[1]):
        raise ConformanceError(f"Q {Q.shape} does not match K x N = {(D.shape[1], Y.shape[1])}")
    K = D.shape[1]
    G = (1.0 + p.alpha) * (D.T @ D)
    G[np.diag_indices(K)] += p.beta + p.gamma
    rhs = D.T @ (Y + p.alpha * Y_alter) + p.gamma * Q
    return solve_spd(G, rhs, report, singular_ok=(p.beta + p.gamma) > 0, ridge=p.beta + p.gamma)


def update_dictionary(X, Y, Y_alter, alpha: float,
                      report: SolverReport | None = None) -> np.ndarray:
    """D = (Y X' + a Y_alter X') ((1+a) X X')^-1; atoms are left unnormalized.

    A numerically rank-deficient X X' falls back to the pseudo-inverse.
    """
    X, Y, Y_alter = map(as_array, (X, Y, Y_alter))
    _check_pair(Y, Y_alter)
    if X.shape[1] != Y.shape[1]:
        raise ConformanceError(f"X {X.shape} and Y {Y.shape}: column counts differ")
    A = (1.0 + alpha) * (X @ X.T)
    B = (Y + alpha * Y_alter) @ X.T
    factor = _cholesky(A)
    if factor is None:
        _warn(report, "X X' is rank-deficient; dictionary solved by pseudo-inverse")
        return B @ np.linalg.pinv(A, hermitian=True)
    return linalg.cho_solve(factor, B.T, check_finite=False).T


def normalize_atoms(D, rng: np.random.Generator | None = None,
                    report: SolverReport | None = None):
    """Scale every atom to unit norm.

    Zero atoms are replaced by a random unit vector drawn from ``rng``.
    Accepts a raw matrix or a :class:`Dictionary` and returns the same kind.
    """
    labels = D.atom_labels if isinstance(D, Dictionary) else None
    D = np.array(as_array(D), dtype=np.float64)
    norms = np.linalg.norm(D, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        rng = rng or np.random.default_rng(0)
        _warn(report, f"zero atoms {zero.tolist()} replaced by random unit vectors")
        D[:, zero] = rng.standard_normal((D.shape[0], zero.size))
        norms[zero] = np.linalg.norm(D[:, zero], axis=0)
    D /= norms
    # one more pass so that norms land within rounding of 1
    D /= np.linalg.norm(D, axis=0)
    return D if labels is None else Dictionary(D, labels)


def _relative_change(prev: float, cur: float) -> float:
    return abs(cur - prev) / max(prev, 1e-12)


def prepare_training(Y: LabeledMatrix, Y_alter: LabeledMatrix, K: int,
                     init: KsvdParams | None, init_dictionary: Dictionary | None):
    if Y.data.shape != Y_alter.data.shape:
        raise ConformanceError(f"Y {Y.data.shape} and Y_alter {Y_alter.data.shape} differ")
    if not np.array_equal(Y.labels, Y_alter.labels):
        raise ConfigError("Y and Y_alter must carry identical per-column labels")
    Y.require_all_classes()
    if init_dictionary is None:
        if K % Y.class_count:
            raise ConfigError(f"K={K} is not divisible by the {Y.class_count} classes")
        init_dictionary = init_dictionary_per_class(Y, K, init or KsvdParams())
    Q = build_ideal_matrix(Y.labels, init_dictionary.atom_labels)
    return init_dictionary, Q


def esdl_train(Y: LabeledMatrix, Y_alter: LabeledMatrix, K: int, p: EsdlParams | None = None,
               init: KsvdParams | None = None, *, normalize_in_loop: bool = True,
               init_dictionary: Dictionary | None = None) -> EsdlModel:
    """Fit dictionary and coefficients by alternating the two closed-form updates.

    The objective is recorded after each dictionary update, before atoms are
    renormalized. With ``normalize_in_loop=False`` atoms are normalized once
    at the end and X rows are rescaled so that DX is unchanged.
    """
    p = p or EsdlParams()
    report = SolverReport()
    t0 = time.perf_counter()
    dictionary, Q = prepare_training(Y, Y_alter, K, init, init_dictionary)
    labels = dictionary.atom_labels
    D = np.array(dictionary.atoms)
    Yd, Ya = Y.data, Y_alter.data
    rng = np.random.default_rng(init.seed if init else 0)
    # objective below this is treated as an exact fit
    zero_floor = 1e-24 * max(np.sum(Yd**2) + p.alpha * np.sum(Ya**2), 1.0)

    prev = None
    for it in range(p.max_iters):
        X = update_coefficients(D, Yd, Ya, Q, p, report)
        D = update_dictionary(X, Yd, Ya, p.alpha, report)
        f = esdl_objective(Yd, Ya, D, X, Q, p)
        if not np.isfinite(f):
            raise NumericalError(f"objective became non-finite at iteration {it + 1}")
        report.objective_trace.append(f)
        report.iterations_run = it + 1
        if normalize_in_loop:
            D = normalize_atoms(D, rng, report)
        if f <= zero_floor or (prev is not None and _relative_change(prev, f) < p.tol):
            report.converged = True
            break
        prev = f

    if not normalize_in_loop:
        norms = np.linalg.norm(D, axis=0)
        D = normalize_atoms(D, rng, report)
        X = X * np.where(norms > 0, norms, 1.0)[:, None]
    report.train_seconds = time.perf_counter() - t0
    return EsdlModel(Dictionary(D, labels), X, p, report)
