"""Tucker models, truncated HOSVD and an ALS (HOOI) baseline."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import svd
from .tensor import frobenius_norm, multi_mode_product, unfold

__all__ = ["TuckerModel", "tucker_reconstruct", "hosvd", "tucker_als", "best_rank_matrix",
           "random_tucker"]

log = logging.getLogger(__name__)


@dataclass
class TuckerModel:
    """``core x_1 factors[0] x_2 ... x_N factors[N-1]``.

    ``orthonormal`` records, per factor, whether its columns are orthonormal.
    Oblique factors (e.g. ``U (Phi U)^{-1}``) are stored with the flag unset.
    """

    core: np.ndarray
    factors: list[np.ndarray]
    orthonormal: list[bool] = field(default_factory=list)

    def __post_init__(self):
        self.core = np.asarray(self.core, dtype=np.float64)
        self.factors = [np.asarray(A, dtype=np.float64) for A in self.factors]
        if not self.orthonormal:
            self.orthonormal = [False] * len(self.factors)
        if len(self.factors) != self.core.ndim or len(self.orthonormal) != self.core.ndim:
            raise ValueError(f"order-{self.core.ndim} core needs {self.core.ndim} factors, "
                             f"got {len(self.factors)}")
        for n, A in enumerate(self.factors):
            if A.ndim != 2 or A.shape[1] != self.core.shape[n]:
                raise ValueError(f"factor {n} has shape {A.shape}, core mode size is {self.core.shape[n]}")
            if self.orthonormal[n]:
                err = np.linalg.norm(A.T @ A - np.eye(A.shape[1]), 2)
                if err > 1e-10:
                    raise ValueError(f"factor {n} flagged orthonormal but ||A^T A - I|| = {err:.2e}")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(A.shape[0] for A in self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.shape


def tucker_reconstruct(model: TuckerModel) -> np.ndarray:
    return multi_mode_product(model.core, model.factors)


def _check_ranks(T: np.ndarray, ranks: Sequence[int]) -> tuple[int, ...]:
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != T.ndim:
        raise ValueError(f"need {T.ndim} ranks, got {len(ranks)}")
    for n, (r, d) in enumerate(zip(ranks, T.shape)):
        if not 1 <= r <= d:
            raise ValueError(f"rank {r} for mode {n} must lie in [1, {d}]")
    return ranks


def _leading_left_vectors(M: np.ndarray, r: int) -> np.ndarray:
    U = svd(M).U[:, :r]
    if U.shape[1] < r:
        # wide-rank request on a short unfolding: pad with an orthonormal complement
        Q, _ = np.linalg.qr(np.hstack([U, np.eye(M.shape[0])]))
        U = Q[:, :r]
    return U


def hosvd(T: np.ndarray, ranks: Sequence[int]) -> TuckerModel:
    """Truncated higher-order SVD."""
    T = np.asarray(T, dtype=np.float64)
    ranks = _check_ranks(T, ranks)
    factors = [_leading_left_vectors(unfold(T, n), r) for n, r in enumerate(ranks)]
    core = multi_mode_product(T, [U.T for U in factors])
    return TuckerModel(core, factors, [True] * T.ndim)


def tucker_als(T: np.ndarray, ranks: Sequence[int], max_iters: int = 50, tol: float = 1e-8,
               return_history: bool = False):
    """Higher-order orthogonal iteration started from the truncated HOSVD.

    Stops when a sweep changes the fit ``1 - ||T - T_hat|| / ||T||`` by less
    than ``tol`` or after ``max_iters`` sweeps, and returns the best iterate
    seen.
    """
    T = np.asarray(T, dtype=np.float64)
    ranks = _check_ranks(T, ranks)
    model = hosvd(T, ranks)

    def fit_error(core, factors):
        # explicit residual; ||T||^2 - ||G||^2 cancels catastrophically near exact fits
        return frobenius_norm(T - multi_mode_product(core, factors))

    factors = list(model.factors)
    norm_T = max(frobenius_norm(T), np.finfo(float).tiny)
    best_err = fit_error(model.core, factors)
    best = model
    history = [best_err]
    for it in range(max_iters):
        for n in range(T.ndim):
            proj = multi_mode_product(T, [U.T for U in factors], skip=n)
            factors[n] = _leading_left_vectors(unfold(proj, n), ranks[n])
        core = multi_mode_product(T, [U.T for U in factors])
        err = fit_error(core, factors)
        history.append(err)
        change = abs(history[-2] - err) / norm_T
        if err <= best_err:
            best = TuckerModel(core, list(factors), [True] * T.ndim)
            best_err = err
        if change <= tol:
            log.debug("tucker_als converged after %d sweeps, error %.3e", it + 1, best_err)
            break
    if return_history:
        return best, history
    return best


def best_rank_matrix(M: np.ndarray, R: int) -> np.ndarray:
    """Truncated SVD ``U_1 Lambda_1 V_1^T`` from the leading ``R`` triplets."""
    M = np.asarray(M, dtype=np.float64)
    if not 1 <= R <= min(M.shape):
        raise ValueError(f"rank {R} outside [1, {min(M.shape)}]")
    f = svd(M)
    return (f.U[:, :R] * f.S[:R]) @ f.V[:, :R].T


def random_tucker(dims: Sequence[int], ranks: Sequence[int], rng: np.random.Generator,
                  orthonormal: bool = True) -> TuckerModel:
    """Gaussian core with (optionally orthonormalized) Gaussian factors."""
    dims = tuple(int(d) for d in dims)
    ranks = tuple(int(r) for r in ranks)
    if len(dims) != len(ranks):
        raise ValueError("dims and ranks differ in length")
    core = rng.standard_normal(ranks)
    factors = []
    for d, r in zip(dims, ranks):
        if r > d:
            raise ValueError(f"rank {r} exceeds dimension {d}")
        A = rng.standard_normal((d, r))
        if orthonormal:
            A, _ = np.linalg.qr(A)
        factors.append(A)
    return TuckerModel(core, factors, [orthonormal] * len(dims))
