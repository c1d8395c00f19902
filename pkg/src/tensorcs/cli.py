"""``tensorcs`` command line: gen, sense, reconstruct, psnr, bench.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .bench import NoisySignalSpec, SweepConfig, derive_seed, gen_noisy_signal, psnr, run_sweep, write_csv
from .reconstruction import TruncationPolicy, algorithm1, reconstruct
from .sensing import AssemblyError, Kind, SensingEnsemble, assemble_from_two_mode, gen_sensing, \
    load_measurements, make_ensemble, multiway_measure, save_measurements, two_mode_measure
from .tensor import read_ten1, write_ten1

log = logging.getLogger("tensorcs")

EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"values must be positive, got {text!r}")
    return vals


def _non_negative_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


def _non_negative_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v >= 0 or math.isinf(v):
        raise argparse.ArgumentTypeError(f"must be a finite non-negative number, got {text!r}")
    return v


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` inclusive of ``b`` (up to rounding)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must look like a:b:step, got {text!r}")
    try:
        a, b, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid bounds must be numbers, got {text!r}") from None
    if not step > 0 or b < a:
        raise argparse.ArgumentTypeError(f"grid needs step > 0 and b >= a, got {text!r}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return [round(a + k * step, 12) for k in range(count)]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tensorcs", description="Tensor compressed sensing by direct multilinear reconstruction.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="synthetic low-rank tensor plus noise, unit Frobenius norm")
    g.add_argument("--dims", type=_int_list, required=True)
    g.add_argument("--ranks", type=_int_list, required=True)
    g.add_argument("--epsilon", type=_non_negative_float, default=0.0)
    g.add_argument("--decay", type=_non_negative_float, default=0.0,
                   help="decades of core energy decay across each rank range")
    g.add_argument("--seed", type=_non_negative_int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--source", default=None,
                   help="TEN1 tensor whose rank-RANKS ALS fit replaces the random low-rank part")
    g.add_argument("--als-max-iters", type=_non_negative_int, default=50, dest="als_max_iters")
    g.add_argument("--als-tol", type=_non_negative_float, default=1e-8, dest="als_tol")

    s = sub.add_parser("sense", help="take multi-way measurements of a tensor")
    s.add_argument("--input", required=True)
    s.add_argument("--ranks", type=_int_list, required=True)
    s.add_argument("--kind", choices=[Kind.GAUSSIAN.value, Kind.BERNOULLI.value], default="gaussian")
    s.add_argument("--mode", choices=["multiway", "two-mode"], default="multiway")
    s.add_argument("--r3", type=_non_negative_int, default=None,
                   help="two-mode only: rows of a random mode-3 operator (default: identity)")
    s.add_argument("--seed", type=_non_negative_int, required=True)
    s.add_argument("--out", required=True)

    r = sub.add_parser("reconstruct", help="direct reconstruction from a measurement directory")
    r.add_argument("--meas", required=True)
    t = r.add_mutually_exclusive_group(required=True)
    t.add_argument("--tau", type=_non_negative_float)
    t.add_argument("--auto-epsilon", type=_non_negative_float, dest="auto_epsilon")
    r.add_argument("--out", required=True)
    r.add_argument("--report", default=None)

    q = sub.add_parser("psnr", help="peak signal to noise ratio in dB")
    q.add_argument("--ref", required=True)
    q.add_argument("--test", required=True)

    b = sub.add_parser("bench", help="Monte Carlo sweep written as CSV")
    b.add_argument("--sweep", choices=["tau", "epsilon", "delta"], required=True)
    b.add_argument("--grid", type=parse_grid, required=True)
    b.add_argument("--trials", type=_non_negative_int, required=True)
    b.add_argument("--seed", type=_non_negative_int, required=True)
    b.add_argument("--config", required=True, help="JSON signal and sensing description")
    b.add_argument("--out", required=True)
    b.add_argument("--jobs", type=_non_negative_int, default=1)
    b.add_argument("--timing", action="store_true", help="write wall times (output no longer byte-stable)")
    return p


def cmd_gen(args) -> int:
    if len(args.dims) != len(args.ranks):
        raise UsageError("--dims and --ranks need the same number of entries")
    source = read_ten1(args.source) if args.source else None
    spec = NoisySignalSpec(args.dims, args.ranks, args.epsilon, args.seed, decay=args.decay, source=source,
                           als_max_iters=args.als_max_iters, als_tol=args.als_tol)
    sig = gen_noisy_signal(spec)
    write_ten1(args.out, sig.X)
    log.info("wrote %s, achieved epsilon %.6g", args.out, sig.epsilon)
    return 0


def cmd_sense(args) -> int:
    X = read_ten1(args.input)
    if args.mode == "multiway":
        if args.r3 is not None:
            raise UsageError("--r3 only applies to --mode two-mode")
        if len(args.ranks) != X.ndim:
            raise UsageError(f"--ranks needs {X.ndim} entries for an order-{X.ndim} tensor")
        ens = make_ensemble(X.shape, args.ranks, args.kind, args.seed)
        save_measurements(args.out, multiway_measure(X, ens), ens)
        return 0
    if X.ndim != 3:
        raise UsageError("two-mode sensing needs an order-3 tensor")
    if len(args.ranks) not in (2, 3):
        raise UsageError("two-mode --ranks takes r1,r2 (optionally r3)")
    r3 = args.r3
    if len(args.ranks) == 3:
        if r3 is not None and r3 != args.ranks[2]:
            raise UsageError("third --ranks entry disagrees with --r3")
        r3 = args.ranks[2]
    Phi1 = gen_sensing(args.kind, args.ranks[0], X.shape[0], args.seed, 0)
    Phi2 = gen_sensing(args.kind, args.ranks[1], X.shape[1], args.seed, 1)
    if r3 is None:
        Phi3, k3 = np.eye(X.shape[2]), Kind.IDENTITY
    else:
        Phi3, k3 = gen_sensing(args.kind, r3, X.shape[2], args.seed, 2), Kind(args.kind)
    ens = SensingEnsemble([Phi1, Phi2, Phi3], [Kind(args.kind), Kind(args.kind), k3], args.seed)
    Y = two_mode_measure(X, Phi1, Phi2)
    save_measurements(args.out, assemble_from_two_mode(Y, Phi1, Phi2, Phi3), ens, two_mode=Y)
    return 0


def cmd_reconstruct(args) -> int:
    meas, ens, two_mode, manifest = load_measurements(args.meas)
    if args.auto_epsilon is not None:
        if args.auto_epsilon == 0:
            raise UsageError("--auto-epsilon must be positive")
        policy = TruncationPolicy.auto(args.auto_epsilon)
    else:
        policy = TruncationPolicy.fixed(args.tau)
    if two_mode is not None:
        rep = algorithm1(two_mode, *ens.matrices, policy=policy)
    else:
        rep = reconstruct(meas, ens, policy)
    write_ten1(args.out, rep.reconstruction)
    if args.report:
        Path(args.report).write_text(json.dumps(rep.to_json(), indent=2) + "\n")
    return 0


def cmd_psnr(args) -> int:
    value = psnr(read_ten1(args.ref), read_ten1(args.test))
    print("inf" if math.isinf(value) else f"{value:.6f}")
    return 0


def config_from_json(cfg: dict, sweep: str, grid: list[float], trials: int, seed: int,
                     jobs: int) -> SweepConfig:
    """Build a :class:`SweepConfig` from the ``--config`` JSON.

    Keys: ``dims``, ``ranks`` (required); ``epsilon``, ``decay``, ``kinds``
    (one string or a list), ``sensing_ranks``, ``tau_rule``, ``tau`` and
    ``grid_log10`` (grid values are base-10 exponents).
    """
    known = {"dims", "ranks", "epsilon", "decay", "kinds", "sensing_ranks", "tau_rule", "tau", "grid_log10"}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("dims", "ranks"):
        if key not in cfg:
            raise UsageError(f"config is missing {key!r}")
    if cfg.get("grid_log10"):
        grid = [10.0 ** v for v in grid]
    kinds = cfg.get("kinds", "gaussian")
    if isinstance(kinds, str):
        kinds = [kinds] * len(cfg["dims"])
    # the signal seed is derived from --seed so that all randomness flows from it
    spec = NoisySignalSpec(cfg["dims"], cfg["ranks"], float(cfg.get("epsilon", 0.0)), derive_seed(seed, 0),
                           decay=float(cfg.get("decay", 0.0)))
    return SweepConfig(sweep, grid, spec, trials=trials, base_seed=seed, kinds=kinds,
                       sensing_ranks=cfg.get("sensing_ranks"), tau_rule=cfg.get("tau_rule", "absolute"),
                       tau=float(cfg.get("tau", 0.0)), jobs=max(jobs, 1))


def cmd_bench(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    try:
        cfg_json = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config}: invalid JSON ({exc})") from None
    if not isinstance(cfg_json, dict):
        raise UsageError(f"{args.config}: expected a JSON object")
    cfg = config_from_json(cfg_json, args.sweep, args.grid, args.trials, args.seed, args.jobs)
    result = run_sweep(cfg)
    write_csv(result, args.out, timing=args.timing)
    for s in result.summary:
        log.info("%s=%.6g mean=%.6g std=%.6g psnr=%.3f failures=%d", args.sweep, s.value, s.mean, s.std,
                 s.mean_psnr, s.failures)
    return 0


COMMANDS = {"gen": cmd_gen, "sense": cmd_sense, "reconstruct": cmd_reconstruct, "psnr": cmd_psnr,
            "bench": cmd_bench}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (np.linalg.LinAlgError, AssemblyError, FloatingPointError) as exc:
        print(f"tensorcs {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"tensorcs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
