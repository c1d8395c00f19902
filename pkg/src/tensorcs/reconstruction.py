"""Direct (non-iterative) reconstruction from multi-way measurements.

The estimate is ``W x_1 Z_1 W_(1)^{*tau} x_2 ... x_N Z_N W_(N)^{*tau}`` where
``Z_n`` is the mode-n unfolding of the n-th measurement tensor and
``W_(n)^{*tau}`` the truncated pseudo-inverse of the unfolded core
measurement. With ``tau = 0`` this recovers any tensor of multilinear rank
``(R_1, ..., R_N)`` exactly as long as every ``W_(n)`` has full row rank.

Error-bound helpers cover the two cases with proven bounds: matrices, and
3rd-order tensors whose mode-3 sensing operator is the identity.
"""
from __future__ import annotations

import enum
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import kept_mask, spectral_norm, svd, truncated_pinv
from .sensing import Kind, MeasurementSet, SensingEnsemble, TwoModeMeasurements, assemble_from_two_mode
from .tensor import frobenius_norm, multi_mode_product, unfold
from .tucker import TuckerModel

__all__ = [
    "RankDeficiencyWarning",
    "TruncationPolicy",
    "ReconstructionReport",
    "Branch",
    "BoundConstants",
    "BoundReport",
    "reconstruct",
    "algorithm1",
    "tau0",
    "tau0_rough",
    "oblique_factors",
    "bound_constants",
    "error_bound",
    "bound_report",
    "lemma1_residual",
]


class RankDeficiencyWarning(UserWarning):
    """An unfolded core measurement is numerically rank deficient."""


@dataclass(frozen=True)
class TruncationPolicy:
    """Either a fixed threshold or the rough automatic one ``eps * prod ||Phi_n||``."""

    tau: float | None = 0.0
    epsilon: float | None = None

    def __post_init__(self):
        if self.epsilon is not None:
            if self.epsilon <= 0:
                raise ValueError(f"automatic truncation needs epsilon > 0, got {self.epsilon}")
        elif self.tau is None or self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")

    @classmethod
    def fixed(cls, tau: float) -> "TruncationPolicy":
        return cls(tau=float(tau))

    @classmethod
    def auto(cls, epsilon: float) -> "TruncationPolicy":
        return cls(tau=None, epsilon=float(epsilon))

    @property
    def is_auto(self) -> bool:
        return self.epsilon is not None

    def resolve(self, sensing: Sequence[np.ndarray]) -> float:
        if self.epsilon is None:
            return float(self.tau)
        return self.epsilon * math.prod(spectral_norm(P) for P in sensing)


@dataclass
class ReconstructionReport:
    reconstruction: np.ndarray
    tau_used: float
    spectra: list[np.ndarray]
    truncation_counts: list[int]
    wall_ms: float
    warnings: list[str] = field(default_factory=list)

    @property
    def sigma_min(self) -> list[float]:
        """Smallest singular value of each unfolded core measurement."""
        return [float(s[-1]) if s.size else 0.0 for s in self.spectra]

    def to_json(self) -> dict:
        return {
            "tau": self.tau_used,
            "truncation_counts": list(self.truncation_counts),
            "sigma_spectra": [s.tolist() for s in self.spectra],
            "wall_ms": self.wall_ms,
            "warnings": list(self.warnings),
        }


def reconstruct(meas: MeasurementSet, ensemble: SensingEnsemble,
                policy: TruncationPolicy | float = 0.0, warn: bool = True) -> ReconstructionReport:
    """Reconstruct the sensed tensor from ``meas``.

    ``policy`` may be a bare threshold. Numerically rank-deficient ``W_(n)``
    at ``tau = 0`` is handled by dropping round-off singular values and
    raises a :class:`RankDeficiencyWarning` instead of failing. With
    ``warn=False`` the note only goes into the report.
    """
    if not isinstance(policy, TruncationPolicy):
        policy = TruncationPolicy.fixed(policy)
    N = meas.order
    if ensemble.order != N or len(meas.Z) != N:
        raise ValueError(f"order mismatch: {len(meas.Z)} measurements, core order {N}, "
                         f"ensemble order {ensemble.order}")
    if meas.W.shape != ensemble.ranks:
        raise ValueError(f"core measurement shape {meas.W.shape} != sensing ranks {ensemble.ranks}")
    for n, Zn in enumerate(meas.Z):
        expected = tuple(ensemble.dims[n] if m == n else r for m, r in enumerate(ensemble.ranks))
        if Zn.shape != expected:
            raise ValueError(f"measurement {n} has shape {Zn.shape}, expected {expected}")

    start = time.perf_counter()
    tau = policy.resolve(ensemble.matrices)
    spectra, counts, notes, factors = [], [], [], []
    for n in range(N):
        Wn = unfold(meas.W, n)
        f = svd(Wn)
        keep = kept_mask(f.S, tau, Wn.shape)
        spectra.append(f.S)
        counts.append(int(f.S.size - np.count_nonzero(keep)))
        if tau == 0 and ensemble.kinds[n] is Kind.IDENTITY:
            # Z^(n) = W here, and W_(n) W_(n)^+ fixes W_(n) whatever its rank
            factors.append(None)
            continue
        if tau == 0 and (counts[-1] or f.S.size < Wn.shape[0]):
            msg = (f"W_({n + 1}) is numerically rank deficient "
                   f"(rank {np.count_nonzero(keep)} < {Wn.shape[0]}); reconstruction is not exact")
            notes.append(msg)
            if warn:
                warnings.warn(msg, RankDeficiencyWarning, stacklevel=2)
        Wpinv = (f.V[:, keep] / f.S[keep]) @ f.U[:, keep].T
        factors.append(unfold(meas.Z[n], n) @ Wpinv)
    Xhat = multi_mode_product(meas.W, factors)
    wall_ms = (time.perf_counter() - start) * 1e3
    return ReconstructionReport(Xhat, tau, spectra, counts, wall_ms, notes)


def algorithm1(Y: TwoModeMeasurements, Phi1: np.ndarray, Phi2: np.ndarray, Phi3: np.ndarray,
               policy: TruncationPolicy | float = 0.0, warn: bool = True) -> ReconstructionReport:
    """Reconstruct a 3rd-order tensor from mode-1 and mode-2 projections only."""
    meas = assemble_from_two_mode(Y, Phi1, Phi2, Phi3)
    kinds = [Kind.CUSTOM, Kind.CUSTOM,
             Kind.IDENTITY if Phi3.shape[0] == Phi3.shape[1] and np.array_equal(Phi3, np.eye(Phi3.shape[0]))
             else Kind.CUSTOM]
    ensemble = SensingEnsemble([Phi1, Phi2, Phi3], kinds)
    return reconstruct(meas, ensemble, policy, warn=warn)


def tau0(epsilon: float, a: float, c: float) -> float:
    """Threshold minimising ``a tau + b eps + c eps^2 / tau``: ``eps * sqrt(c / a)``."""
    if a <= 0:
        raise ValueError(f"tau0 needs a > 0, got a={a}")
    if epsilon < 0 or c < 0:
        raise ValueError("epsilon and c must be non-negative")
    return epsilon * math.sqrt(c / a)


def tau0_rough(epsilon: float, Phi1: np.ndarray, Phi2: np.ndarray) -> float:
    """Over-estimate of :func:`tau0` that needs only the sensing matrices."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return epsilon * spectral_norm(Phi1) * spectral_norm(Phi2)


class Branch(str, enum.Enum):
    LOW_TAU = "low_tau"
    HIGH_TAU = "high_tau"
    GAP = "gap"


@dataclass(frozen=True)
class BoundConstants:
    a: float
    b: float
    c: float
    order: int
    norms: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BoundReport:
    a: float
    b: float
    c: float
    sigma_min_per_mode: tuple[float, ...]
    sigma_bar: float
    sigma_underbar: float
    tau_used: float
    epsilon: float
    bound_value: float
    branch: Branch
    low_value: float | None = None
    high_value: float | None = None

    @property
    def claimed(self) -> bool:
        """False in the gap between the two proven branches."""
        return self.branch is not Branch.GAP


def oblique_factors(model: TuckerModel, ensemble: SensingEnsemble) -> list[np.ndarray]:
    """``A_n = U_n (Phi_n U_n)^{-1}`` so that ``Phi_n A_n = I``.

    Identity-sensed modes get ``A_n = I``.
    """
    out = []
    for n, (U, P, kind) in enumerate(zip(model.factors, ensemble.matrices, ensemble.kinds)):
        if kind is Kind.IDENTITY:
            out.append(np.eye(P.shape[0]))
            continue
        PU = P @ U
        if PU.shape[0] != PU.shape[1]:
            raise ValueError(f"mode {n}: sensing rows {P.shape[0]} differ from model rank {U.shape[1]}")
        cond = np.linalg.cond(PU)
        if not np.isfinite(cond) or cond > 1e14:
            raise np.linalg.LinAlgError(f"mode {n}: Phi U is singular (condition {cond:.3e}); "
                                        f"degenerate sensing draw")
        out.append(np.linalg.solve(PU.T, U.T).T)
    return out


def bound_constants(model: TuckerModel, ensemble: SensingEnsemble) -> BoundConstants:
    """Constants ``a, b, c`` of the stability bound for a known low-rank part.

    ``model`` must carry orthonormal factors (e.g. a truncated HOSVD). Valid
    for matrices and for 3rd-order tensors sensed with ``Phi_3 = I``.
    """
    N = len(model.factors)
    if not all(model.orthonormal):
        raise ValueError("bound constants need a Tucker model with orthonormal factors")
    if ensemble.order != N:
        raise ValueError("model and ensemble orders differ")
    if N == 3 and ensemble.kinds[2] is not Kind.IDENTITY:
        raise ValueError("3rd-order bounds only hold when mode-3 sensing is the identity")
    if N not in (2, 3):
        raise ValueError(f"no proven bound for order {N}")
    A = oblique_factors(model, ensemble)
    P1, P2 = ensemble.matrices[0], ensemble.matrices[1]
    nA1, nA2 = spectral_norm(A[0]), spectral_norm(A[1])
    nAP1, nAP2 = spectral_norm(A[0] @ P1), spectral_norm(A[1] @ P2)
    nP1, nP2 = spectral_norm(P1), spectral_norm(P2)
    a = nA1 * nA2
    if N == 3:
        R1, R2 = ensemble.ranks[0], ensemble.ranks[1]
        I3 = ensemble.dims[2]
        a *= math.sqrt(R1) + math.sqrt(R2) + math.sqrt(I3)
    b = 1 + nAP1 * nAP2 + nA1 * (1 + nAP2) * nP1 + nA2 * (1 + nAP1) * nP2
    c = (1 + nAP1) * (1 + nAP2) * nP1 * nP2
    norms = {"A1": nA1, "A2": nA2, "A1Phi1": nAP1, "A2Phi2": nAP2, "Phi1": nP1, "Phi2": nP2}
    return BoundConstants(a, b, c, N, norms)


def error_bound(a: float, b: float, c: float, sigma_min: Sequence[float], tau: float,
                epsilon: float) -> BoundReport:
    """Piecewise error bound in ``tau``.

    ``sigma_min`` holds the smallest singular value of each ``W_(n)``: one or
    two entries for a matrix, three for the 3rd-order case. In the 3rd-order
    case the low-threshold term uses ``min(sigma_R1, sigma_R2)`` and thresholds
    strictly between the smallest and largest ``sigma_Rn`` fall in an
    unproven gap: both candidate values are returned and ``claimed`` is False.
    """
    sig = tuple(float(s) for s in sigma_min)
    if not sig or any(s < 0 for s in sig) or min(a, b, c, tau, epsilon) < 0:
        raise ValueError("bound inputs must be non-negative")
    if len(sig) > 3:
        raise ValueError("bounds exist for matrices and 3rd-order tensors only")
    three_d = len(sig) == 3
    s_under, s_bar = min(sig), max(sig)
    sigma_R = min(sig[:2]) if three_d else s_under

    def low():
        if sigma_R == 0:
            raise ValueError("sigma_R = 0: the core measurement is rank deficient, bound undefined")
        return b * epsilon + c * epsilon ** 2 / sigma_R

    def high():
        return a * tau + b * epsilon + c * epsilon ** 2 / tau

    if tau <= s_under:
        branch, value = Branch.LOW_TAU, low()
        lo, hi = value, None
    elif tau > s_bar:
        branch, value = Branch.HIGH_TAU, high()
        lo, hi = None, value
    else:
        lo, hi = low(), high()
        branch, value = Branch.GAP, max(lo, hi)
    return BoundReport(a, b, c, sig, s_bar, s_under, float(tau), float(epsilon), value, branch, lo, hi)


def bound_report(model: TuckerModel, ensemble: SensingEnsemble, W: np.ndarray, tau: float,
                 epsilon: float) -> BoundReport:
    """Constants from ``model`` plus per-mode ``sigma_R`` from ``W``, evaluated at ``tau``."""
    k = bound_constants(model, ensemble)
    sig = [float(np.linalg.svd(unfold(W, n), compute_uv=False)[-1]) for n in range(W.ndim)]
    if W.ndim == 2:
        sig = sig[:1]
    return error_bound(k.a, k.b, k.c, sig, tau, epsilon)


def lemma1_residual(W: np.ndarray, tau: float) -> tuple[np.ndarray, float]:
    """``H = W x_1 P_1 x_2 P_2 x_3 P_3 - W`` with ``P_n = W_(n) W_(n)^{*tau}``."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 3:
        raise ValueError(f"expected a 3rd-order core, got order {W.ndim}")
    projectors = []
    for n in range(3):
        Wn = unfold(W, n)
        projectors.append(Wn @ truncated_pinv(Wn, tau))
    H = multi_mode_product(W, projectors) - W
    return H, frobenius_norm(H)
