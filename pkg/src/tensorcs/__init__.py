"""Multilinear compressed sensing with a direct, non-iterative reconstruction."""
from .bench import NoisySignalSpec, SweepConfig, gen_noisy_signal, psnr, run_sweep, write_csv
from .linalg import pinv_properties_check, spectral_norm, svd, truncated_pinv
from .reconstruction import (Branch, TruncationPolicy, algorithm1, bound_constants, bound_report, error_bound,
                             lemma1_residual, reconstruct, tau0, tau0_rough)
from .sensing import (Kind, MeasurementSet, SensingEnsemble, load_measurements, make_ensemble, multiway_measure,
                      rank_for_ratio, sampling_ratio, save_measurements, two_mode_measure)
from .tensor import fold, kronecker, mode_n_product, read_ten1, unfold, write_ten1
from .tucker import TuckerModel, hosvd, random_tucker, tucker_als, tucker_reconstruct

__version__ = "0.1.0"

__all__ = [
    "NoisySignalSpec",
    "SweepConfig",
    "gen_noisy_signal",
    "psnr",
    "run_sweep",
    "write_csv",
    "pinv_properties_check",
    "spectral_norm",
    "svd",
    "truncated_pinv",
    "Branch",
    "TruncationPolicy",
    "algorithm1",
    "bound_constants",
    "bound_report",
    "error_bound",
    "lemma1_residual",
    "reconstruct",
    "tau0",
    "tau0_rough",
    "Kind",
    "MeasurementSet",
    "SensingEnsemble",
    "load_measurements",
    "make_ensemble",
    "multiway_measure",
    "rank_for_ratio",
    "sampling_ratio",
    "save_measurements",
    "two_mode_measure",
    "fold",
    "kronecker",
    "mode_n_product",
    "read_ten1",
    "unfold",
    "write_ten1",
    "TuckerModel",
    "hosvd",
    "random_tucker",
    "tucker_als",
    "tucker_reconstruct",
]
