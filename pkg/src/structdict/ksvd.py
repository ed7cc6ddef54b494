"""K-SVD dictionary learning and the per-class initializer used by both solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coding import OmpParams, omp_code_batch
from .core import Dictionary, LabeledMatrix, as_array
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class KsvdParams:
    atoms: int = 0  # 0: let the caller decide (init_dictionary_per_class)
    sparsity: int | None = None  # None: min(5, atoms)
    iterations: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("K-SVD needs at least one iteration")
        if self.sparsity is not None and self.sparsity < 1:
            raise ConfigError("K-SVD sparsity must be at least 1")


def _normalize(v: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(v)
    return v / nrm if nrm > 0 else v


def _fix_sign(u: np.ndarray) -> float:
    """+1 or -1 such that u's largest-magnitude entry becomes positive."""
    return 1.0 if u[np.argmax(np.abs(u))] >= 0 else -1.0


def update_atom(Y: np.ndarray, D: np.ndarray, X: np.ndarray, k: int) -> bool:
    """Rank-one SVD refit of atom k and its coefficient row, in place.

    Only the columns currently using atom k are touched. Returns False when
    no column uses the atom.
    """
    used = np.flatnonzero(X[k])
    if used.size == 0:
        return False
    E = Y[:, used] - D @ X[:, used] + np.outer(D[:, k], X[k, used])
    U, s, Vt = np.linalg.svd(E, full_matrices=False)
    sign = _fix_sign(U[:, 0])
    D[:, k] = sign * U[:, 0]
    X[k, used] = sign * s[0] * Vt[0]
    return True


def ksvd_train(Y, p: KsvdParams, init_atoms: np.ndarray | None = None,
               rng: np.random.Generator | None = None):
    """Learn ``p.atoms`` unit-norm atoms for Y by K-SVD.

    Returns ``(D, X, trace)`` where ``trace[t]`` is ||Y - DX||_F^2 after
    iteration t. A column keeps its previous code when fresh OMP coding does
    not reduce its residual; this makes the trace non-increasing.
    """
    Y = as_array(Y)
    n, N = Y.shape
    K = p.atoms if init_atoms is None else np.asarray(init_atoms).shape[1]
    if K < 1:
        raise ConfigError("K-SVD needs at least one atom")
    if K > N:
        raise ConfigError(f"cannot learn {K} atoms from {N} samples")
    if not np.all(np.isfinite(Y)):
        raise DataError("training data contains NaN or Inf")
    T0 = min(p.sparsity or 5, K)
    omp = OmpParams(sparsity=T0, residual_tol=0.0)
    if rng is None:
        rng = np.random.default_rng(p.seed)

    if init_atoms is not None:
        D = np.array(init_atoms, dtype=np.float64)
    else:
        D = Y[:, rng.choice(N, size=K, replace=False)].copy()
    for k in range(K):
        if np.linalg.norm(D[:, k]) == 0:
            D[:, k] = rng.standard_normal(n)
        D[:, k] = _normalize(D[:, k])

    X = None
    trace: list[float] = []
    for _ in range(p.iterations):
        X_new = omp_code_batch(D, Y, omp)
        if X is not None:
            old = np.sum((Y - D @ X) ** 2, axis=0)
            new = np.sum((Y - D @ X_new) ** 2, axis=0)
            keep = old < new
            X_new[:, keep] = X[:, keep]
        X = X_new

        unused = []
        for k in range(K):
            if not update_atom(Y, D, X, k):
                unused.append(k)
        if unused:
            # replacement atoms carry zero coefficients, so the fit is unchanged
            err = np.sum((Y - D @ X) ** 2, axis=0)
            order = np.argsort(-err, kind="stable")
            for k, col in zip(unused, order):
                if np.linalg.norm(Y[:, col]) > 0:
                    D[:, k] = _normalize(Y[:, col])
        trace.append(float(np.sum((Y - D @ X) ** 2)))
    return D, X, trace


def init_dictionary_per_class(Y: LabeledMatrix, K: int, p: KsvdParams | None = None,
                              atoms_per_class=None) -> Dictionary:
    """Concatenate per-class K-SVD sub-dictionaries in class order.

    ``atoms_per_class`` overrides the even split K/C.
    """
    p = p or KsvdParams()
    C = Y.class_count
    if atoms_per_class is None:
        if K % C:
            raise ConfigError(
                f"{K} atoms do not divide evenly over {C} classes; "
                "pass atoms_per_class explicitly"
            )
        atoms_per_class = [K // C] * C
    elif len(atoms_per_class) != C or sum(atoms_per_class) != K:
        raise ConfigError("atoms_per_class must list one count per class summing to K")
    sizes = Y.class_sizes()
    seeds = np.random.SeedSequence(p.seed).spawn(C)
    blocks, labels = [], []
    for c in range(C):
        k_c = int(atoms_per_class[c])
        if sizes[c] < k_c:
            raise ConfigError(
                f"class {Y.label_names[c]} has {sizes[c]} samples, fewer than its {k_c} atoms"
            )
        if k_c == 0:
            continue
        Yc = Y.data[:, Y.labels == c]
        sub = KsvdParams(atoms=k_c, sparsity=p.sparsity, iterations=p.iterations, seed=p.seed)
        Dc, _, _ = ksvd_train(Yc, sub, rng=np.random.default_rng(seeds[c]))
        blocks.append(Dc)
        labels += [c] * k_c
    return Dictionary(np.hstack(blocks), np.array(labels))
