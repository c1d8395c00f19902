"""Sensing ensembles and the measurement operators built from them.

Per-mode sensing matrices are drawn from independent counter-based streams
keyed by ``(seed, mode_tag)``, so the draw of one mode never depends on which
other modes were generated first.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .tensor import fold, frobenius_norm, kronecker, mode_n_product, multi_mode_product, \
    read_ten1, unfold, write_ten1

__all__ = [
    "Kind",
    "SensingEnsemble",
    "MeasurementSet",
    "TwoModeMeasurements",
    "AssemblyError",
    "stream",
    "gen_sensing",
    "make_ensemble",
    "multiway_measure",
    "two_mode_measure",
    "assemble_from_two_mode",
    "split_first_measurement",
    "recover_Z12",
    "sampling_ratio",
    "rank_for_ratio",
    "save_measurements",
    "load_measurements",
]

FORMAT_VERSION = 1


class Kind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"
    IDENTITY = "identity"
    CUSTOM = "custom"


class AssemblyError(RuntimeError):
    """Two-mode assembly produced inconsistent core tensors."""


def stream(seed: int, *tags: int) -> np.random.Generator:
    """Independent Philox stream keyed by ``seed`` and integer tags."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, tags)])))


def gen_sensing(kind: Kind | str, R: int, I: int, seed: int, mode_tag: int) -> np.ndarray:
    """An ``R x I`` sensing matrix.

    Gaussian entries are unscaled standard normals and Bernoulli entries are
    +/-1 with equal probability. Identity requires ``R == I``.
    """
    kind = Kind(kind)
    if not 1 <= R <= I:
        raise ValueError(f"sensing rows R={R} must lie in [1, I={I}]")
    if kind is Kind.IDENTITY:
        if R != I:
            raise ValueError(f"identity sensing needs R == I, got R={R}, I={I}")
        return np.eye(I)
    rng = stream(seed, mode_tag)
    if kind is Kind.GAUSSIAN:
        return rng.standard_normal((R, I))
    if kind is Kind.BERNOULLI:
        return np.where(rng.integers(0, 2, size=(R, I)) == 1, 1.0, -1.0)
    raise ValueError("custom sensing matrices cannot be generated; pass them to SensingEnsemble")


@dataclass
class SensingEnsemble:
    matrices: list[np.ndarray]
    kinds: list[Kind]
    seed: int = 0

    def __post_init__(self):
        self.matrices = [np.asarray(P, dtype=np.float64) for P in self.matrices]
        self.kinds = [Kind(k) for k in self.kinds]
        if len(self.kinds) != len(self.matrices):
            raise ValueError("one kind per sensing matrix is required")
        for n, (P, k) in enumerate(zip(self.matrices, self.kinds)):
            if P.ndim != 2 or P.shape[0] > P.shape[1]:
                raise ValueError(f"sensing matrix {n} has shape {P.shape}; need R <= I")
            if k is Kind.IDENTITY and (P.shape[0] != P.shape[1] or not np.array_equal(P, np.eye(P.shape[0]))):
                raise ValueError(f"sensing matrix {n} is tagged identity but is not")

    @property
    def order(self) -> int:
        return len(self.matrices)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(P.shape[0] for P in self.matrices)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(P.shape[1] for P in self.matrices)


def make_ensemble(dims: Sequence[int], ranks: Sequence[int], kinds: Sequence[Kind | str] | Kind | str,
                  seed: int) -> SensingEnsemble:
    """Generate one matrix per mode, mode ``n`` keyed by tag ``n``."""
    if isinstance(kinds, (str, Kind)):
        kinds = [kinds] * len(dims)
    if not len(dims) == len(ranks) == len(kinds):
        raise ValueError("dims, ranks and kinds must have one entry per mode")
    mats = [gen_sensing(k, int(r), int(d), seed, n) for n, (k, r, d) in enumerate(zip(kinds, ranks, dims))]
    return SensingEnsemble(mats, list(kinds), seed)


@dataclass
class MeasurementSet:
    """Multi-way measurements ``Z[n]`` (all modes sensed except ``n``) and the core ``W``."""

    Z: list[np.ndarray]
    W: np.ndarray
    seed: int = 0
    kinds: list[Kind] = field(default_factory=list)

    @property
    def order(self) -> int:
        return self.W.ndim

    def consistency_error(self, ensemble: SensingEnsemble) -> float:
        """Largest relative gap ``||Z[n] x_n Phi_n - W|| / ||W||`` over modes."""
        scale = max(frobenius_norm(self.W), np.finfo(float).tiny)
        return max(frobenius_norm(mode_n_product(Zn, P, n) - self.W) / scale
                   for n, (Zn, P) in enumerate(zip(self.Z, ensemble.matrices)))


@dataclass
class TwoModeMeasurements:
    """Linear projections of the mode-1 and mode-2 fibers of a 3rd-order tensor."""

    Y1: np.ndarray
    Y2: np.ndarray
    dims: tuple[int, int, int]

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        I1, I2, I3 = self.dims
        if self.Y1.ndim != 2 or self.Y1.shape[1] != I2 * I3:
            raise ValueError(f"Y1 has shape {self.Y1.shape}; expected (R1, {I2 * I3})")
        if self.Y2.ndim != 2 or self.Y2.shape[1] != I1 * I3:
            raise ValueError(f"Y2 has shape {self.Y2.shape}; expected (R2, {I1 * I3})")


def _check_ensemble(X: np.ndarray, ensemble: SensingEnsemble) -> None:
    if ensemble.order != X.ndim or ensemble.dims != X.shape:
        raise ValueError(f"ensemble acts on {ensemble.dims}, tensor has shape {X.shape}")


def multiway_measure(X: np.ndarray, ensemble: SensingEnsemble) -> MeasurementSet:
    X = np.asarray(X, dtype=np.float64)
    _check_ensemble(X, ensemble)
    Z = [multi_mode_product(X, ensemble.matrices, skip=n) for n in range(X.ndim)]
    W = mode_n_product(Z[0], ensemble.matrices[0], 0)
    return MeasurementSet(Z, W, ensemble.seed, list(ensemble.kinds))


def two_mode_measure(X: np.ndarray, Phi1: np.ndarray, Phi2: np.ndarray) -> TwoModeMeasurements:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"two-mode sensing is defined for 3rd-order tensors, got order {X.ndim}")
    if Phi1.shape[1] != X.shape[0] or Phi2.shape[1] != X.shape[1]:
        raise ValueError(f"sensing shapes {Phi1.shape}, {Phi2.shape} do not fit tensor {X.shape}")
    return TwoModeMeasurements(Phi1 @ unfold(X, 0), Phi2 @ unfold(X, 1), X.shape)


def assemble_from_two_mode(Y: TwoModeMeasurements, Phi1: np.ndarray, Phi2: np.ndarray, Phi3: np.ndarray,
                           rtol: float = 1e-10) -> MeasurementSet:
    """Build the full multi-way measurement set from mode-1/mode-2 projections.

    ``Phi3`` is a synthetic mode-3 operator; it is never applied to the
    signal itself, only to the projections. ``W`` is computed through mode 3
    and cross-checked against the mode-1 route.
    """
    I1, I2, I3 = Y.dims
    R1, R2, R3 = Phi1.shape[0], Phi2.shape[0], Phi3.shape[0]
    if Phi1.shape != (R1, I1) or Phi2.shape != (R2, I2) or Phi3.shape != (R3, I3):
        raise ValueError(f"sensing shapes {Phi1.shape}, {Phi2.shape}, {Phi3.shape} do not fit dims {Y.dims}")
    if Y.Y1.shape[0] != R1 or Y.Y2.shape[0] != R2:
        raise ValueError("projection row counts disagree with the sensing matrices")

    Z1_2 = Y.Y2 @ kronecker(Phi3.T, np.eye(I1))  # mode-2 unfolding of Z^(1)
    Z1 = fold(Z1_2, 1, (I1, R2, R3))
    Z2_1 = Y.Y1 @ kronecker(Phi3.T, np.eye(I2))  # mode-1 unfolding of Z^(2)
    Z2 = fold(Z2_1, 0, (R1, I2, R3))
    Z3_1 = Y.Y1 @ kronecker(np.eye(I3), Phi2.T)  # mode-1 unfolding of Z^(3)
    Z3 = fold(Z3_1, 0, (R1, R2, I3))

    W = mode_n_product(Z3, Phi3, 2)
    W_alt = mode_n_product(Z1, Phi1, 0)
    gap = frobenius_norm(W - W_alt) / max(frobenius_norm(W), np.finfo(float).tiny)
    if gap > rtol:
        raise AssemblyError(f"core tensors from modes 1 and 3 disagree (relative gap {gap:.2e})")
    return MeasurementSet([Z1, Z2, Z3], W)


def split_first_measurement(Z1: np.ndarray, Phi1: np.ndarray, R: int):
    """Split ``Z1^T`` and ``Phi1`` into leading ``I-R`` columns and trailing ``R x R`` blocks."""
    I = Phi1.shape[1]
    Z1t = Z1.T
    return Z1t[:, :I - R], Z1t[:, I - R:], Phi1[:, :I - R], Phi1[:, I - R:]


def recover_Z12(Z2: np.ndarray, Z11: np.ndarray, Phi1: np.ndarray, Phi2: np.ndarray,
                max_cond: float = 1e12) -> np.ndarray:
    """Recompute the held-out block ``Z_{1,2}`` of a 2D measurement.

    ``(Phi2 Z2 - Z11 Phi11^T) (Phi12^{-1})^T`` where ``Phi1 = (Phi11, Phi12)``
    and ``Phi12`` is the trailing square block.
    """
    R, I = Phi1.shape
    if Z11.shape != (R, I - R):
        raise ValueError(f"Z11 has shape {Z11.shape}; expected {(R, I - R)}")
    Phi11, Phi12 = Phi1[:, :I - R], Phi1[:, I - R:]
    cond = np.linalg.cond(Phi12)
    if not np.isfinite(cond) or cond > max_cond:
        raise np.linalg.LinAlgError(f"trailing block of Phi1 is singular to working precision "
                                    f"(condition number {cond:.3e}); redraw the sensing matrix")
    rhs = Phi2 @ Z2 - Z11 @ Phi11.T
    # rhs = Z12 Phi12^T  =>  Phi12 Z12^T = rhs^T
    return np.linalg.solve(Phi12, rhs.T).T


def sampling_ratio(R: int, I: int) -> float:
    """Non-redundant measurement count over signal size, ``2 R/I - (R/I)^2``."""
    if not 0 < R <= I:
        raise ValueError(f"need 0 < R <= I, got R={R}, I={I}")
    q = R / I
    return 2 * q - q * q


def rank_for_ratio(delta: float, I: int) -> int:
    """Nearest integer ``R`` with ``sampling_ratio(R, I) ~= delta``."""
    if not 0 < delta <= 1:
        raise ValueError(f"sampling ratio must lie in (0, 1], got {delta}")
    return min(I, max(1, round(I * (1 - math.sqrt(1 - delta)))))


def save_measurements(directory: str | Path, meas: MeasurementSet, ensemble: SensingEnsemble,
                      two_mode: TwoModeMeasurements | None = None) -> Path:
    """Write ``Z_n.ten``, ``W.ten``, ``Phi_n.ten`` (and ``Y1/Y2`` when given) plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for n, Zn in enumerate(meas.Z, start=1):
        write_ten1(d / f"Z_{n}.ten", Zn)
    write_ten1(d / "W.ten", meas.W)
    for n, P in enumerate(ensemble.matrices, start=1):
        write_ten1(d / f"Phi_{n}.ten", P)
    if two_mode is not None:
        write_ten1(d / "Y1.ten", two_mode.Y1)
        write_ten1(d / "Y2.ten", two_mode.Y2)
    manifest = {
        "format_version": FORMAT_VERSION,
        "seed": int(ensemble.seed),
        "kinds": [k.value for k in ensemble.kinds],
        "dims": list(ensemble.dims),
        "ranks": list(ensemble.ranks),
        "mode": "two-mode" if two_mode is not None else "multiway",
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return d


def load_measurements(directory: str | Path):
    """Inverse of :func:`save_measurements`.

    Returns ``(meas, ensemble, two_mode_or_None, manifest)``.
    """
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported measurement format {manifest.get('format_version')!r}")
    N = len(manifest["dims"])
    mats = [read_ten1(d / f"Phi_{n}.ten") for n in range(1, N + 1)]
    ensemble = SensingEnsemble(mats, manifest["kinds"], manifest["seed"])
    if list(ensemble.dims) != manifest["dims"] or list(ensemble.ranks) != manifest["ranks"]:
        raise ValueError("sensing matrices on disk do not match the manifest shapes")
    Z = [read_ten1(d / f"Z_{n}.ten") for n in range(1, N + 1)]
    meas = MeasurementSet(Z, read_ten1(d / "W.ten"), manifest["seed"], list(ensemble.kinds))
    two_mode = None
    if manifest.get("mode") == "two-mode":
        two_mode = TwoModeMeasurements(read_ten1(d / "Y1.ten"), read_ten1(d / "Y2.ten"), tuple(manifest["dims"]))
    return meas, ensemble, two_mode, manifest
