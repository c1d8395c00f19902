"""Synthetic signals, PSNR and seeded Monte Carlo sweeps with CSV output."""
from __future__ import annotations

import csv
import enum
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .linalg import spectral_norm
from .reconstruction import TruncationPolicy, bound_constants, reconstruct, tau0
from .sensing import Kind, make_ensemble, multiway_measure, rank_for_ratio, sampling_ratio, stream
from .tensor import frobenius_norm, multi_mode_product
from .tucker import TuckerModel, random_tucker, tucker_als, tucker_reconstruct

__all__ = [
    "NoisySignalSpec",
    "NoisySignal",
    "gen_noisy_signal",
    "psnr",
    "SweepVar",
    "SweepConfig",
    "TrialRecord",
    "PointSummary",
    "SweepResult",
    "derive_seed",
    "run_sweep",
    "write_csv",
    "CSV_HEADER",
]

CSV_HEADER = ["sweep_var", "value", "trial", "seed", "error", "psnr_db", "tau", "sigma_min_modes", "wall_ms"]


@dataclass
class NoisySignalSpec:
    """``X = X0 + eps * E`` with ``||E||_F = 1``, rescaled to ``||X||_F = 1``.

    ``decay`` > 0 scales the core so that mode-n slice energies fall off by
    ``decay`` decades across the rank range; this gives an ill-conditioned
    signal. A ``source`` tensor replaces the random Tucker model by its
    rank-``ranks`` ALS approximation (``als_max_iters``, ``als_tol``).
    """

    dims: tuple[int, ...]
    ranks: tuple[int, ...]
    epsilon: float = 0.0
    seed: int = 0
    normalize: bool = True
    decay: float = 0.0
    source: np.ndarray | None = None
    als_max_iters: int = 50
    als_tol: float = 1e-8

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.ranks = tuple(int(r) for r in self.ranks)
        if len(self.dims) != len(self.ranks):
            raise ValueError(f"dims {self.dims} and ranks {self.ranks} differ in length")
        if any(not 1 <= r <= d for r, d in zip(self.ranks, self.dims)):
            raise ValueError(f"ranks {self.ranks} must lie in [1, dims {self.dims}]")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.decay < 0:
            raise ValueError(f"decay must be non-negative, got {self.decay}")
        if self.source is not None and np.shape(self.source) != self.dims:
            raise ValueError(f"source has shape {np.shape(self.source)}, dims are {self.dims}")


@dataclass
class NoisySignal:
    X: np.ndarray
    X0: np.ndarray
    epsilon: float  # achieved, ||X - X0||_F after rescaling
    model: TuckerModel  # Tucker form of X0 (after rescaling)


def gen_noisy_signal(spec: NoisySignalSpec) -> NoisySignal:
    """Draw ``X0`` from stream ``(seed, 0)`` and ``E`` from stream ``(seed, 1)``."""
    if spec.source is not None:
        model = tucker_als(np.asarray(spec.source, dtype=np.float64), spec.ranks,
                           max_iters=spec.als_max_iters, tol=spec.als_tol)
    else:
        model = random_tucker(spec.dims, spec.ranks, stream(spec.seed, 0))
        if spec.decay > 0:
            scales = [np.diag(10.0 ** (-spec.decay * np.arange(r) / max(r - 1, 1))) for r in spec.ranks]
            model = TuckerModel(multi_mode_product(model.core, scales), model.factors, model.orthonormal)
    X0 = tucker_reconstruct(model)
    s0 = frobenius_norm(X0)
    if s0 == 0:
        raise ValueError("low-rank part of the signal is zero")
    if spec.normalize:
        X0 = X0 / s0
        model = replace(model, core=model.core / s0)
    E = stream(spec.seed, 1).standard_normal(spec.dims)
    E /= frobenius_norm(E)
    X = X0 + spec.epsilon * E
    scale = 1.0 / frobenius_norm(X) if spec.normalize else 1.0
    return NoisySignal(X * scale, X0 * scale, spec.epsilon * scale,
                       TuckerModel(model.core * scale, model.factors, model.orthonormal))


def psnr(X: np.ndarray, Xhat: np.ndarray) -> float:
    """``20 log10(max(X) / ||Xhat - X||_F)`` in dB; ``inf`` on an exact match."""
    X = np.asarray(X, dtype=np.float64)
    Xhat = np.asarray(Xhat, dtype=np.float64)
    if X.shape != Xhat.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Xhat.shape}")
    peak = float(X.max())
    if peak <= 0:
        raise ValueError(f"PSNR undefined for max(X) = {peak} <= 0; shift the data first")
    err = frobenius_norm(Xhat - X)
    if err == 0:
        return math.inf
    return 20.0 * math.log10(peak / err)


class SweepVar(str, enum.Enum):
    TAU = "tau"
    EPSILON = "epsilon"
    DELTA = "delta"


@dataclass
class SweepConfig:
    """Monte Carlo sweep over one variable.

    ``tau_rule`` fixes what a threshold number means: ``absolute`` uses it as
    is, ``tau0`` multiplies the per-trial optimal threshold from the bound
    constants, and ``tau0_rough`` multiplies ``eps * prod ||Phi_n||``. For tau
    sweeps the grid supplies that number, otherwise ``tau`` does.
    ``sensing_ranks`` defaults to the signal ranks; delta sweeps override it
    on every non-identity mode.
    """

    variable: SweepVar
    grid: list[float]
    signal: NoisySignalSpec
    trials: int = 1
    base_seed: int = 0
    kinds: list[Kind] = field(default_factory=list)
    sensing_ranks: tuple[int, ...] | None = None
    tau_rule: str = "absolute"
    tau: float = 0.0
    jobs: int = 1

    def __post_init__(self):
        self.variable = SweepVar(self.variable)
        self.grid = [float(v) for v in self.grid]
        N = len(self.signal.dims)
        if not self.kinds:
            self.kinds = [Kind.GAUSSIAN] * N
        self.kinds = [Kind(k) for k in self.kinds]
        if self.sensing_ranks is None:
            self.sensing_ranks = self.signal.ranks
        self.sensing_ranks = tuple(int(r) for r in self.sensing_ranks)
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if len(self.kinds) != N or len(self.sensing_ranks) != N:
            raise ValueError(f"kinds and sensing_ranks need {N} entries")
        if self.tau_rule not in ("absolute", "tau0", "tau0_rough"):
            raise ValueError(f"unknown tau_rule {self.tau_rule!r}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")
        if self.variable is SweepVar.DELTA and any(not 0 < v <= 1 for v in self.grid):
            raise ValueError("delta grid values must lie in (0, 1]")
        if self.variable is not SweepVar.TAU and self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")


@dataclass
class TrialRecord:
    value: float
    trial: int
    seed: int
    error: float  # spectral norm for matrices, Frobenius otherwise
    error_fro: float
    psnr: float
    tau: float
    sigma_min: list[float]
    wall_ms: float
    failure: str | None = None


@dataclass
class PointSummary:
    value: float
    mean: float
    std: float
    min: float
    max: float
    mean_psnr: float
    failures: int
    realized_delta: list[float] | None = None


@dataclass
class SweepResult:
    config: SweepConfig
    records: list[TrialRecord]
    summary: list[PointSummary]


def derive_seed(base: int, *tags: int) -> int:
    """A 63-bit seed derived from ``base`` and integer tags."""
    words = np.random.SeedSequence([int(base), *map(int, tags)]).generate_state(2, dtype=np.uint32)
    return (int(words[0]) | (int(words[1]) << 32)) & ((1 << 63) - 1)


def _error(X: np.ndarray, Xhat: np.ndarray) -> float:
    D = Xhat - X
    return spectral_norm(D) if D.ndim == 2 else frobenius_norm(D)


def _run_trial(cfg: SweepConfig, point: int, trial: int, sig: NoisySignal,
               sensing_ranks: tuple[int, ...]) -> TrialRecord:
    value = cfg.grid[point]
    seed = derive_seed(cfg.base_seed, 1, point, trial)
    start = time.perf_counter()
    tau = math.nan
    try:
        ens = make_ensemble(sig.X.shape, sensing_ranks, cfg.kinds, seed)
        number = value if cfg.variable is SweepVar.TAU else cfg.tau
        if cfg.tau_rule == "absolute":
            tau = number
        elif cfg.tau_rule == "tau0_rough":
            tau = number * TruncationPolicy.auto(sig.epsilon).resolve(ens.matrices) if sig.epsilon > 0 else 0.0
        else:
            k = bound_constants(sig.model, ens)
            tau = number * tau0(sig.epsilon, k.a, k.c)
        rep = reconstruct(multiway_measure(sig.X, ens), ens, TruncationPolicy.fixed(tau), warn=False)
        wall = (time.perf_counter() - start) * 1e3
        return TrialRecord(value, trial, seed, _error(sig.X, rep.reconstruction),
                           frobenius_norm(rep.reconstruction - sig.X), psnr(sig.X, rep.reconstruction),
                           tau, rep.sigma_min, wall)
    except (np.linalg.LinAlgError, ValueError, ArithmeticError) as exc:
        wall = (time.perf_counter() - start) * 1e3
        return TrialRecord(value, trial, seed, math.nan, math.nan, math.nan, tau, [], wall,
                           f"{type(exc).__name__}: {exc}")


def _point_setup(cfg: SweepConfig, point: int, base_signal: NoisySignal | None):
    value = cfg.grid[point]
    ranks = cfg.sensing_ranks
    if cfg.variable is SweepVar.EPSILON:
        sig = gen_noisy_signal(replace(cfg.signal, epsilon=value))
    else:
        sig = base_signal
    if cfg.variable is SweepVar.DELTA:
        ranks = tuple(d if k is Kind.IDENTITY else rank_for_ratio(value, d)
                      for k, d in zip(cfg.kinds, cfg.signal.dims))
    return sig, ranks


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Run every (point, trial) pair; records come back sorted by (point, trial).

    Each trial draws its own sensing ensemble from ``derive_seed(base, 1,
    point, trial)``, so results do not depend on ``jobs`` or scheduling. The
    signal comes from ``cfg.signal.seed`` and is shared by all trials.
    """
    base_signal = None if cfg.variable is SweepVar.EPSILON else gen_noisy_signal(cfg.signal)
    setups = [_point_setup(cfg, p, base_signal) for p in range(len(cfg.grid))]
    jobs = [(p, t) for p in range(len(cfg.grid)) for t in range(cfg.trials)]

    def work(pt):
        p, t = pt
        return _run_trial(cfg, p, t, *setups[p])

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            records = list(pool.map(work, jobs))  # map preserves input order
    else:
        records = [work(pt) for pt in jobs]

    summary = []
    for p, value in enumerate(cfg.grid):
        recs = records[p * cfg.trials:(p + 1) * cfg.trials]
        ok = [r for r in recs if r.failure is None]
        errs = np.array([r.error for r in ok])
        ps = np.array([r.psnr for r in ok])
        realized = None
        if cfg.variable is SweepVar.DELTA:
            realized = [sampling_ratio(r, d) for r, d in zip(setups[p][1], cfg.signal.dims)]
        if ok:
            summary.append(PointSummary(value, float(errs.mean()), float(errs.std()), float(errs.min()),
                                        float(errs.max()), float(ps.mean()), len(recs) - len(ok), realized))
        else:
            summary.append(PointSummary(value, math.nan, math.nan, math.nan, math.nan, math.nan,
                                        len(recs), realized))
    return SweepResult(cfg, records, summary)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(result: SweepResult, out: str | Path | None = None, timing: bool = False) -> str:
    """Serialize records; ``wall_ms`` is ``nan`` unless ``timing`` so output is byte-stable."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    var = result.config.variable.value
    for r in result.records:
        w.writerow([var, _fmt(r.value), r.trial, r.seed, _fmt(r.error), _fmt(r.psnr), _fmt(r.tau),
                    ";".join(_fmt(s) for s in r.sigma_min), _fmt(r.wall_ms if timing else math.nan)])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text
