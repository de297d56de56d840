"""Command-line interface.

Subcommands: convert, spectrum, propagate, optimize, bench, jitter.
Matrices and specs travel as JSON, tabular data as CSV. Exit codes:
0 success, 1 numerical failure, 2 malformed input. PWMCTL_THREADS caps
worker parallelism on non-timed paths.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import bench as bench_mod
from .devices import DeviceSpec, device_from_json, embed_gate
from .errors import MalformedInput, PwmError
from .linalg import matrix_from_json, matrix_to_json
from .optimize import (
    OptimizerConfig,
    evaluate_staircase_conversion,
    fidelity,
    objective_for_gate,
    optimize,
    random_train,
)
from .propagate import (
    EigenCache,
    JitterConfig,
    jitter_expectation,
    jitter_monte_carlo,
    propagate_hard_pulse,
    propagate_train,
    system_from_json,
)
from .pwm import (
    amplitude_from_waveform,
    spectrum_compare,
    spectrum_to_csv,
    train_from_csv,
    train_from_waveforms,
    train_to_csv,
    waveform_from_json,
)


def worker_count() -> int:
    """Worker cap for non-timed parallel paths (PWMCTL_THREADS, default 1)."""
    try:
        return max(1, int(os.environ.get("PWMCTL_THREADS", "1")))
    except ValueError:
        return 1


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"{path}: {exc}") from exc


def _cmd_convert(args) -> int:
    wave = waveform_from_json(_load_json(args.waveform))
    tau = args.tau
    if args.M is not None:
        num_intervals = args.M
    else:
        if args.T is not None:
            total = args.T
        elif hasattr(wave, "omega"):
            total = 2.0 * math.pi / wave.omega
        else:
            total = wave.t_end - wave.t0
        num_intervals = max(1, round(total / tau))
    if args.xi.lower() == "auto":
        xi = None
    else:
        xi = [float(args.xi)]
    train = train_from_waveforms([wave], tau, num_intervals, xi=xi, shape=args.shape)
    train_to_csv(train, args.out)
    print(f"wrote {args.out}: M={train.num_intervals} tau={train.tau} xi={train.xi[0]:.6g}")
    return 0


def _cmd_spectrum(args) -> int:
    wave = waveform_from_json(_load_json(args.waveform))
    train = train_from_csv(args.train)
    report = spectrum_compare(wave, train, k=args.k - 1)
    spectrum_to_csv(report, args.out)
    print(
        f"threshold={report.threshold:.6g} rad/ns  "
        f"max_rel_dev_below_0.8*threshold={report.max_relative_deviation_below_threshold:.3e}"
    )
    return 0


def _device_for_system(args, system) -> DeviceSpec:
    if args.device:
        return device_from_json(_load_json(args.device))
    atoms = round(math.log(system.dim, 3))
    if 3**atoms != system.dim:
        raise MalformedInput(
            "cannot infer device layout from system dimension; pass --device"
        )
    return DeviceSpec(atoms=atoms)


def _cmd_propagate(args) -> int:
    system = system_from_json(_load_json(args.system))
    train = train_from_csv(args.train)
    cache = EigenCache(system)
    if args.hard_pulse:
        if args.order:
            raise MalformedInput("--order does not combine with --hard-pulse")
        u = propagate_hard_pulse(system, train, cache)
    else:
        u = propagate_train(system, train, cache, order=args.order)
    payload = matrix_to_json(u)
    if args.target:
        spec = _device_for_system(args, system)
        if os.path.exists(args.target):
            block = matrix_from_json(_load_json(args.target))
            obj = objective_for_gate(system, spec, block)
        else:
            obj = objective_for_gate(system, spec, args.target)
        value = fidelity(obj, u)
        payload["fidelity"] = value
        print(f"fidelity={value:.6f}")
    with open(args.out, "w") as fh:
        json.dump(payload, fh)
    return 0


def _cmd_optimize(args) -> int:
    spec = device_from_json(_load_json(args.device))
    from .devices import build_chain

    system = build_chain(spec)
    obj = objective_for_gate(system, spec, args.gate)
    tau = args.T / args.M
    cfg_fields = {}
    if args.config:
        cfg_fields = _load_json(args.config)
        unknown = set(cfg_fields) - set(OptimizerConfig.__dataclass_fields__)
        if unknown:
            raise MalformedInput(f"unknown optimizer config keys: {sorted(unknown)}")
    if args.seed is not None:
        cfg_fields["seed"] = args.seed
    cfg = OptimizerConfig(**cfg_fields)
    initial = random_train(tau, args.M, system.xi, seed=cfg.seed)
    result = optimize(obj, initial, cfg)

    os.makedirs(args.out, exist_ok=True)
    train_to_csv(result.train, os.path.join(args.out, "train.csv"))
    with open(os.path.join(args.out, "trace.csv"), "w") as fh:
        fh.write("iteration,J,wall_ms\n")
        for it, j_val, wall in result.trajectory:
            fh.write(f"{it},{j_val!r},{wall!r}\n")
    j_stair = evaluate_staircase_conversion(obj, result.train)
    print(
        f"gate={args.gate} J={result.best_j:.6f} J_staircase={j_stair:.6f} "
        f"iterations={result.iterations} termination={result.termination}"
    )
    return 0


def _parse_grid(text: str) -> list[tuple[int, int]]:
    ranges = {}
    for part in text.split(","):
        if "=" not in part:
            raise MalformedInput(f"bad grid component {part!r}")
        key, span = part.split("=", 1)
        key = key.strip().upper()
        if ".." in span:
            lo, hi = span.split("..", 1)
            ranges[key] = range(int(lo), int(hi) + 1)
        else:
            ranges[key] = [int(span)]
    if "N" not in ranges or "K" not in ranges:
        raise MalformedInput("grid must specify N and K, e.g. N=1..4,K=1..8")
    return [(n, k) for n in ranges["N"] for k in ranges["K"]]


def _cmd_bench(args) -> int:
    cases = [
        bench_mod.BenchCase(
            atoms=n,
            num_controls=k,
            num_intervals=args.M,
            repetitions=args.reps,
            seed=args.seed,
        )
        for n, k in _parse_grid(args.grid)
    ]
    report = bench_mod.run_bench(cases)
    bench_mod.bench_to_csv(report, args.out)
    worst = max(r.cross_error for r in report.results)
    print(f"wrote {args.out}: {len(report.results)} cases, worst cross-path error {worst:.2e}")
    return 0


def _cmd_jitter(args) -> int:
    system = system_from_json(_load_json(args.system))
    train = train_from_csv(args.train)
    if args.sigma_ns is not None:
        sigma = np.full((train.num_controls, train.num_intervals), args.sigma_ns)
    else:
        sigma = args.sigma_rel * np.abs(train.widths)
    cfg = JitterConfig(sigma=sigma, trials=args.trials, seed=args.seed)
    result = jitter_monte_carlo(system, train, cfg, workers=worker_count())
    lines = [
        f"# mean_fidelity={result.mean_fidelity!r} fidelity_loss={result.fidelity_loss!r} "
        f"trials={args.trials} seed={args.seed}",
        "m,mean_dev_frob,predicted_frob",
    ]
    for m in range(train.num_intervals):
        measured = float(np.linalg.norm(result.mean_interval_deviation[m]))
        predicted = float(np.linalg.norm(jitter_expectation(system, sigma[:, m])))
        lines.append(f"{m + 1},{measured!r},{predicted!r}")
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"mean_fidelity={result.mean_fidelity:.6f} loss={result.fidelity_loss:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pwmctl", description="Pulse-width-modulated quantum control toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="waveform JSON -> pulse-train CSV")
    p.add_argument("--waveform", required=True)
    p.add_argument("--tau", type=float, required=True, help="interval duration (ns)")
    p.add_argument("--xi", default="auto", help="'auto' (max|u|) or a value in rad/ns")
    p.add_argument("--M", type=int, default=None, help="interval count (default T/tau)")
    p.add_argument("--T", type=float, default=None, help="total time (ns)")
    p.add_argument("--shape", choices=["rectangular", "gaussian"], default="rectangular")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("spectrum", help="compare waveform and train spectra")
    p.add_argument("--waveform", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--k", type=int, default=1, help="control index (1-based)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("propagate", help="propagate a train through a system")
    p.add_argument("--system", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--hard-pulse", action="store_true")
    p.add_argument("--order", type=int, default=0, help="higher-order composition index n")
    p.add_argument("--target", default=None, help="gate name or matrix JSON path")
    p.add_argument("--device", default=None, help="device JSON (for --target embedding)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_propagate)

    p = sub.add_parser("optimize", help="optimize pulse widths for a gate")
    p.add_argument("--device", required=True)
    p.add_argument("--gate", required=True, help="NOT, CNOT, or CCZ")
    p.add_argument("--T", type=float, required=True, help="gate time (ns)")
    p.add_argument("--M", type=int, required=True, help="interval count")
    p.add_argument("--config", default=None, help="optimizer config JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("bench", help="PWM vs conventional propagation timing")
    p.add_argument("--grid", default="N=1..4,K=1..8")
    p.add_argument("--M", type=int, default=32)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("jitter", help="Monte-Carlo width-jitter study")
    p.add_argument("--system", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--sigma-rel", type=float, default=0.01, dest="sigma_rel")
    p.add_argument("--sigma-ns", type=float, default=None, dest="sigma_ns")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_jitter)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MalformedInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PwmError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
