"""Numerical-efficiency benchmark: cached-eigenbasis train propagation vs
the conventional per-interval matrix exponential on the same control.

Each case builds a transmon-chain drift with K random Hermitian controls,
draws a random train, and times (a) the cached PWM path and (b) the
staircase baseline carrying identical per-interval integrals. gamma is
the PWM/baseline median wall-time ratio; absolute values are reported,
never asserted, because they are hardware- and BLAS-dependent.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .devices import DeviceSpec, build_chain, mhz_to_rad_per_ns
from .errors import MalformedInput
from .linalg import expm_call_count, expm_pade, reset_expm_count
from .propagate import (
    Control,
    ControlSystem,
    EigenCache,
    interval_segments,
    propagate_staircase,
    propagate_train,
)
from .pwm import PulseTrain, staircase_from_train

__all__ = [
    "BenchCase",
    "CaseResult",
    "BenchReport",
    "random_chain_system",
    "random_bench_train",
    "pade_segment_product",
    "run_bench",
    "bench_to_csv",
    "bench_from_csv",
]


@dataclass(frozen=True)
class BenchCase:
    """One grid point: N atoms (d = 3^N), K controls, M intervals."""

    atoms: int
    num_controls: int
    num_intervals: int = 32
    repetitions: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 3:
            raise ValueError("need at least 3 repetitions for a median")
        if self.atoms < 1 or self.num_controls < 0:
            raise ValueError("invalid case")


@dataclass(frozen=True)
class CaseResult:
    case: BenchCase
    dim: int
    t_pwm_ms: float
    t_base_ms: float
    gamma: float
    expm_calls_pwm: int
    expm_calls_base: int
    cache_entries: int
    cross_error: float


@dataclass(frozen=True)
class BenchReport:
    results: tuple[CaseResult, ...]


def random_chain_system(atoms: int, num_controls: int, seed: int) -> ControlSystem:
    """Chain drift plus K random normalized Hermitian controls.

    Random controls (rather than physical x/y/z axes) let K exceed the
    number of axes the chain offers; only timing structure matters here.
    """
    spec = DeviceSpec(atoms=atoms)
    drift = build_chain(spec).h0
    rng = np.random.default_rng(seed)
    dim = drift.shape[0]
    controls = []
    for _ in range(num_controls):
        raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        herm = (raw + raw.conj().T) / 2.0
        herm /= np.linalg.norm(herm, 2)
        controls.append(Control(herm, mhz_to_rad_per_ns(100.0)))
    return ControlSystem(drift, tuple(controls))


def random_bench_train(case: BenchCase, xi: np.ndarray, tau: float = 1.0) -> PulseTrain:
    rng = np.random.default_rng(case.seed + 1)
    widths = rng.uniform(-tau, tau, size=(case.num_controls, case.num_intervals))
    return PulseTrain(tau=tau, widths=widths, xi=xi, shape="rectangular")


def pade_segment_product(system: ControlSystem, train: PulseTrain) -> np.ndarray:
    """Independent check path: the same nested segments, exponentiated with
    the generic Pade routine instead of the eigendecomposition cache."""
    u = np.eye(system.dim, dtype=np.complex128)
    for m in range(train.num_intervals):
        for seg in interval_segments(train.widths[:, m], train.tau):
            h = system.h0.copy()
            for p, ctl in zip(seg.pattern, system.controls):
                if p != 0:
                    h += p * ctl.xi * ctl.h
            u = expm_pade(h, seg.duration) @ u
    return u


def _median_timing(fn, repetitions: int) -> float:
    times = []
    for _ in range(repetitions):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times)) * 1e3


def run_bench(cases: list[BenchCase]) -> BenchReport:
    """Time both propagation paths per case (warmup excluded, median of
    repetitions) and cross-check their unitaries agree to 1e-8."""
    results = []
    for case in cases:
        system = random_chain_system(case.atoms, case.num_controls, case.seed)
        train = random_bench_train(case, system.xi if case.num_controls else np.ones(0))
        values = staircase_from_train(train)
        cache = EigenCache(system)

        propagate_train(system, train, cache)  # warmup: fills the cache
        reset_expm_count()
        t_pwm = _median_timing(lambda: propagate_train(system, train, cache), case.repetitions)
        expm_pwm = expm_call_count()

        reset_expm_count()
        t_base = _median_timing(
            lambda: propagate_staircase(system, values, train.tau, method="pade"),
            case.repetitions,
        )
        expm_base = expm_call_count()

        u_pwm = propagate_train(system, train, cache)
        cross = float(np.linalg.norm(u_pwm - pade_segment_product(system, train)))
        results.append(
            CaseResult(
                case=case,
                dim=system.dim,
                t_pwm_ms=t_pwm,
                t_base_ms=t_base,
                gamma=t_pwm / t_base,
                expm_calls_pwm=expm_pwm,
                expm_calls_base=expm_base,
                cache_entries=len(cache),
                cross_error=cross,
            )
        )
    return BenchReport(tuple(results))


_CSV_HEADER = (
    "n_atoms,k_controls,m_intervals,dim,repetitions,seed,"
    "t_pwm_ms,t_base_ms,gamma,expm_calls_pwm,expm_calls_base,cache_entries,cross_error"
)


def bench_to_csv(report: BenchReport, path) -> None:
    lines = [_CSV_HEADER]
    for r in report.results:
        c = r.case
        lines.append(
            f"{c.atoms},{c.num_controls},{c.num_intervals},{r.dim},{c.repetitions},{c.seed},"
            f"{r.t_pwm_ms!r},{r.t_base_ms!r},{r.gamma!r},"
            f"{r.expm_calls_pwm},{r.expm_calls_base},{r.cache_entries},{r.cross_error!r}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def bench_from_csv(path) -> BenchReport:
    results = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("n_atoms"):
                continue
            parts = line.split(",")
            if len(parts) != 13:
                raise MalformedInput(f"bad bench CSV row: {line!r}")
            case = BenchCase(
                atoms=int(parts[0]),
                num_controls=int(parts[1]),
                num_intervals=int(parts[2]),
                repetitions=int(parts[4]),
                seed=int(parts[5]),
            )
            results.append(
                CaseResult(
                    case=case,
                    dim=int(parts[3]),
                    t_pwm_ms=float(parts[6]),
                    t_base_ms=float(parts[7]),
                    gamma=float(parts[8]),
                    expm_calls_pwm=int(parts[9]),
                    expm_calls_base=int(parts[10]),
                    cache_entries=int(parts[11]),
                    cross_error=float(parts[12]),
                )
            )
    return BenchReport(tuple(results))
