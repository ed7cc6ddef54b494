"""ADMM solver for the l1-regularized variant of the structured objective."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .coding import soft_threshold
from .core import Dictionary, EsdlParams, LabeledMatrix, SolverReport, as_array, sdl_l1_objective
from .errors import ConfigError, ConformanceError, NumericalError
from .esdl import EsdlModel, normalize_atoms, prepare_training, solve_spd, update_dictionary
from .ksvd import KsvdParams


@dataclass(frozen=True)
class AdmmParams(EsdlParams):
    max_iters: int = 200
    mu0: float = 0.01
    mu_max: float = 1e8
    rho: float = 1.1
    primal_tol: float = 1e-6

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.mu0 <= self.mu_max:
            raise ConfigError("need 0 < mu0 <= mu_max")
        if self.rho <= 1:
            raise ConfigError("rho must exceed 1")
        if self.primal_tol <= 0:
            raise ConfigError("primal_tol must be positive")


def admm_update_x(D, Y, Y_alter, Q, Z, L, mu: float, p: EsdlParams,
                  report: SolverReport | None = None) -> np.ndarray:
    """X = ((1+a) D'D + (mu/2 + g) I)^-1 (D'Y + a D'Y_alter + g Q + (mu Z - L)/2)."""
    if mu <= 0:
        raise ConfigError("penalty mu must be positive")
    D, Y, Y_alter, Q, Z, L = map(as_array, (D, Y, Y_alter, Q, Z, L))
    if Y.shape != Y_alter.shape:
        raise ConformanceError(f"Y {Y.shape} and Y_alter {Y_alter.shape} differ")
    if D.shape[0] != Y.shape[0]:
        raise ConformanceError(f"D {D.shape} and Y {Y.shape}: row counts differ")
    shape = (D.shape[1], Y.shape[1])
    for name, M in (("Q", Q), ("Z", Z), ("L", L)):
        if M.shape != shape:
            raise ConformanceError(f"{name} {M.shape} does not match K x N = {shape}")
    G = (1.0 + p.alpha) * (D.T @ D)
    G[np.diag_indices(shape[0])] += mu / 2 + p.gamma
    rhs = D.T @ (Y + p.alpha * Y_alter) + p.gamma * Q + (mu * Z - L) / 2
    return solve_spd(G, rhs, report, ridge=mu / 2 + p.gamma)


def admm_update_z(X, L, mu: float, beta: float) -> np.ndarray:
    """Z = soft_threshold(X + L/mu, beta/mu)."""
    if mu <= 0:
        raise ConfigError("penalty mu must be positive")
    X, L = as_array(X), as_array(L)
    if X.shape != L.shape:
        raise ConformanceError(f"X {X.shape} and L {L.shape} differ")
    return soft_threshold(X + L / mu, beta / mu)


def sdl_l1_train(Y: LabeledMatrix, Y_alter: LabeledMatrix, K: int, p: AdmmParams | None = None,
                 init: KsvdParams | None = None, *, init_dictionary: Dictionary | None = None,
                 normalize_in_loop: bool = True) -> EsdlModel:
    """ADMM loop: X-update, Z-update, dictionary update, multiplier and penalty steps.

    Stops once max|X - Z| < ``p.primal_tol``. The returned coefficients are
    the sparse iterate Z; the report carries objective (evaluated at Z),
    primal residual and penalty traces.
    """
    p = p or AdmmParams()
    report = SolverReport()
    t0 = time.perf_counter()
    dictionary, Q = prepare_training(Y, Y_alter, K, init, init_dictionary)
    labels = dictionary.atom_labels
    D = np.array(dictionary.atoms)
    Yd, Ya = Y.data, Y_alter.data
    rng = np.random.default_rng(init.seed if init else 0)
    Z = np.zeros_like(Q)
    L = np.zeros_like(Q)
    mu = p.mu0

    for it in range(p.max_iters):
        X = admm_update_x(D, Yd, Ya, Q, Z, L, mu, p, report)
        Z = admm_update_z(X, L, mu, p.beta)
        D = update_dictionary(X, Yd, Ya, p.alpha, report)
        gap = X - Z
        L = L + mu * gap
        residual = float(np.max(np.abs(gap))) if gap.size else 0.0
        f = sdl_l1_objective(Yd, Ya, D, Z, Q, p)
        if not (np.isfinite(f) and np.isfinite(residual) and np.all(np.isfinite(L))):
            raise NumericalError(f"ADMM iterate became non-finite at iteration {it + 1}")
        report.objective_trace.append(f)
        report.primal_residual_trace.append(residual)
        report.mu_trace.append(mu)
        report.iterations_run = it + 1
        if normalize_in_loop:
            D = normalize_atoms(D, rng, report)
        mu = min(p.rho * mu, p.mu_max)
        if residual < p.primal_tol:
            report.converged = True
            break

    if not normalize_in_loop:
        D = normalize_atoms(D, rng, report)
    report.train_seconds = time.perf_counter() - t0
    return EsdlModel(Dictionary(D, labels), Z, p, report)
