"""SVD-based primitives: spectral norm and the truncated pseudo-inverse."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdFactors",
    "SvdConvergenceError",
    "svd",
    "spectral_norm",
    "zero_cutoff",
    "kept_mask",
    "truncated_pinv",
    "smallest_singular_value",
    "PinvCheck",
    "pinv_properties_check",
]


class SvdConvergenceError(np.linalg.LinAlgError):
    """Raised when LAPACK's SVD driver fails to converge."""


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``M = U @ diag(S) @ V.T`` with ``S`` non-increasing."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T


def svd(M: np.ndarray) -> SvdFactors:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"svd expects a matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("svd input contains non-finite entries")
    try:
        U, S, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # LAPACK gesdd does not expose its sweep count; report what it does say.
        raise SvdConvergenceError(f"SVD of {M.shape} matrix did not converge: {exc}") from exc
    return SvdFactors(U, S, Vt.T)


def spectral_norm(M: np.ndarray) -> float:
    """Largest singular value."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def zero_cutoff(S: np.ndarray, shape: tuple[int, int]) -> float:
    """Relative level below which singular values count as round-off."""
    if S.size == 0:
        return 0.0
    return float(S[0]) * max(shape) * np.finfo(np.float64).eps


def kept_mask(S: np.ndarray, tau: float, shape: tuple[int, int]) -> np.ndarray:
    """Singular values that survive truncation: strictly above ``tau`` and above round-off."""
    return (S > tau) & (S > zero_cutoff(S, shape))


def truncated_pinv(M: np.ndarray, tau: float = 0.0, factors: SvdFactors | None = None) -> np.ndarray:
    """Truncated Moore-Penrose pseudo-inverse ``V S^{*tau} U^T``.

    Reciprocals are kept only for singular values strictly greater than
    ``tau``; singular values at the round-off level are always dropped, so
    ``tau=0`` gives the ordinary pseudo-inverse of the numerical range.
    """
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    M = np.asarray(M, dtype=np.float64)
    f = factors if factors is not None else svd(M)
    keep = kept_mask(f.S, tau, M.shape)
    return (f.V[:, keep] / f.S[keep]) @ f.U[:, keep].T


def smallest_singular_value(M: np.ndarray) -> float:
    """``sigma_R``: the ``min(rows, cols)``-th singular value."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[-1])


@dataclass(frozen=True)
class PinvCheck:
    tau: float
    sigma_R: float
    kept: int
    projection_residual: float  # ||W W* W - W||
    inverse_residual: float  # ||W* W W* - W*||
    norm_left: float  # ||W W*||
    norm_right: float  # ||W* W||


def pinv_properties_check(M: np.ndarray, tau: float) -> PinvCheck:
    """Evaluate the three algebraic properties of the truncated pseudo-inverse.

    All norms are spectral. Expected behaviour: ``projection_residual`` is
    zero when ``tau < sigma_R`` and at most ``tau`` otherwise (truncation is
    strict, so ``tau == sigma_R`` drops ``sigma_R``); ``inverse_residual`` is
    zero; both projector norms equal one whenever at least one singular
    value is kept.
    """
    M = np.asarray(M, dtype=np.float64)
    f = svd(M)
    Ws = truncated_pinv(M, tau, factors=f)
    left = M @ Ws
    right = Ws @ M
    return PinvCheck(
        tau=float(tau),
        sigma_R=float(f.S[-1]) if f.S.size else 0.0,
        kept=int(np.count_nonzero(kept_mask(f.S, tau, M.shape))),
        projection_residual=spectral_norm(left @ M - M),
        inverse_residual=spectral_norm(Ws @ M @ Ws - Ws),
        norm_left=spectral_norm(left),
        norm_right=spectral_norm(right),
    )
