"""Time propagation engines for pulse-train control.

The central trick: a train's Hamiltonian at any instant is drawn from the
finite set {H0 + sum_k p_k xi_k H_k : p in {-1,0,+1}^K}, so each member is
diagonalized once, cached, and every propagation step becomes scalar
phases plus two matrix products. A conventional staircase propagator and
a step-refined reference oracle provide the baselines.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from threading import Lock
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotHermitian, WidthOverflow
from .linalg import (
    EigenPair,
    eig_hermitian,
    expm_eig,
    expm_pade,
    is_hermitian,
    matrix_from_json,
    matrix_to_json,
)
from .pwm import PulseTrain

__all__ = [
    "Control",
    "ControlSystem",
    "Segment",
    "EigenCache",
    "JitterConfig",
    "JitterResult",
    "interval_segments",
    "segments_for_train",
    "higher_order_segments",
    "composition_windows",
    "propagate_interval",
    "propagate_train",
    "propagate_hard_pulse",
    "propagate_composed",
    "propagate_staircase",
    "reference_oracle",
    "propagate_state",
    "jitter_expectation",
    "jitter_monte_carlo",
    "system_to_json",
    "system_from_json",
]

HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class Control:
    """One control channel: Hermitian generator h and switch amplitude xi."""

    h: np.ndarray
    xi: float

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128).copy()
        if not is_hermitian(h, HERMITIAN_TOL):
            raise NotHermitian("control Hamiltonian is not Hermitian")
        if self.xi <= 0:
            raise ValueError("xi must be positive")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class ControlSystem:
    """Drift Hamiltonian plus K control channels, all d x d Hermitian (rad/ns)."""

    h0: np.ndarray
    controls: tuple[Control, ...] = ()

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=np.complex128).copy()
        if not is_hermitian(h0, HERMITIAN_TOL):
            raise NotHermitian("drift Hamiltonian is not Hermitian")
        h0.setflags(write=False)
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "controls", tuple(self.controls))
        for c in self.controls:
            if c.h.shape != h0.shape:
                raise DimensionMismatch("control/drift dimension mismatch")

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @property
    def num_controls(self) -> int:
        return len(self.controls)

    @property
    def xi(self) -> np.ndarray:
        return np.array([c.xi for c in self.controls])


class Segment(NamedTuple):
    """A constant-generator stretch: signed duration (ns) and the per-control
    multipliers p with H = H0 + sum_k p_k xi_k H_k."""

    duration: float
    pattern: tuple


class EigenCache:
    """Lazy eigendecompositions of the train's finite Hamiltonian set.

    Keyed by the sign/multiplier pattern; append-only. Concurrent reads are
    safe, insertion is serialized by a lock.
    """

    def __init__(self, system: ControlSystem):
        self.system = system
        self._entries: dict = {}
        self._lock = Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def patterns(self) -> list:
        return list(self._entries)

    def _build(self, key) -> np.ndarray:
        kind, spec = key
        if kind == "mix":
            h = self.system.h0.copy()
            for p, ctl in zip(spec, self.system.controls):
                if p != 0:
                    h += p * ctl.xi * ctl.h
            return h
        ctl = self.system.controls[spec]
        return ctl.xi * ctl.h

    def _get(self, key) -> EigenPair:
        pair = self._entries.get(key)
        if pair is not None:
            self.hits += 1
            return pair
        with self._lock:
            pair = self._entries.get(key)
            if pair is None:
                self.misses += 1
                pair = eig_hermitian(self._build(key))
                self._entries[key] = pair
            else:
                self.hits += 1
        return pair

    def get(self, pattern: tuple) -> EigenPair:
        """Decomposition of H0 + sum_k pattern_k xi_k H_k."""
        if len(pattern) != self.system.num_controls:
            raise DimensionMismatch("pattern length != control count")
        return self._get(("mix", tuple(pattern)))

    def get_control(self, k: int) -> EigenPair:
        """Decomposition of xi_k H_k alone (hard-pulse generator set)."""
        return self._get(("ctl", int(k)))

    def verify(self, tol: float = 1e-10) -> float:
        """Max reconstruction error over all entries (should be < tol)."""
        worst = 0.0
        for key, pair in self._entries.items():
            h = self._build(key)
            rebuilt = (pair.basis * pair.eigenvalues) @ pair.basis.conj().T
            worst = max(worst, float(np.linalg.norm(rebuilt - h)))
        if worst > tol:
            raise NotHermitian(f"cache reconstruction error {worst:g} exceeds {tol:g}")
        return worst


def _merged(segments: list[Segment]) -> list[Segment]:
    out: list[Segment] = []
    for seg in segments:
        if seg.duration == 0.0:
            continue
        if out and out[-1].pattern == seg.pattern:
            out[-1] = Segment(out[-1].duration + seg.duration, seg.pattern)
        else:
            out.append(seg)
    return out


def _nested(sizes: Sequence[float], tau: float, on_vals, off_vals) -> list[Segment]:
    """Symmetric nesting: larger pulses switch on earlier and off later,
    all centered; ties broken toward the lower control index."""
    num = len(sizes)
    order = sorted(range(num), key=lambda k: (-sizes[k], k))
    bounds = [tau] + [sizes[k] for k in order]
    pattern = list(off_vals)
    left = []
    for i in range(num):
        left.append(Segment((bounds[i] - bounds[i + 1]) / 2.0, tuple(pattern)))
        pattern[order[i]] = on_vals[order[i]]
    center = Segment(bounds[num], tuple(pattern))
    segs = _merged(left + [center] + left[::-1])
    return segs if segs else [Segment(tau, tuple(off_vals))]


def interval_segments(widths_m: Sequence[float], tau: float) -> list[Segment]:
    """Decompose one interval into constant-generator segments.

    Controls sorted by |width| descending (lower index wins ties) nest
    symmetrically around the interval center; zero-width controls never
    activate. Durations sum to tau. A negative tau denotes a backward
    window (used by higher-order compositions).
    """
    w = np.asarray(widths_m, dtype=float)
    if tau < 0:
        return [Segment(-d, p) for d, p in interval_segments(-w, -tau)]
    if np.any(np.abs(w) > tau * (1 + 1e-9)):
        raise WidthOverflow(f"widths exceed interval duration {tau:g}")
    sizes = np.minimum(np.abs(w), tau)
    on_vals = [int(np.sign(x)) for x in w]
    return _nested(sizes.tolist(), tau, on_vals, [0] * w.size)


def segments_for_train(train: PulseTrain, m: int) -> list[Segment]:
    """Segments of interval m, handling both level schemes."""
    if train.level_scheme == "two_level":
        low = (train.xi_low / train.xi).tolist()
        sizes = train.widths[:, m].tolist()
        return _nested(sizes, train.tau, [1.0] * train.num_controls, low)
    return interval_segments(train.widths[:, m], train.tau)


def higher_order_segments(segments: Sequence[Segment], order_index: int) -> list[Segment]:
    """Triple-copy composition with factors (s, 1-2s, s), s = 1/(2-2^(1/(2n+1))).

    Applied recursively down to the base segments. The middle factor is
    negative (no positive splitting exists beyond 2nd order), so emitted
    durations are signed; the signed total is preserved.
    """
    if order_index == 0:
        return list(segments)
    if order_index < 0:
        raise ValueError("order_index must be >= 0")
    s = 1.0 / (2.0 - 2.0 ** (1.0 / (2 * order_index + 1)))
    out: list[Segment] = []
    for factor in (s, 1.0 - 2.0 * s, s):
        scaled = [Segment(seg.duration * factor, seg.pattern) for seg in segments]
        out.extend(higher_order_segments(scaled, order_index - 1))
    return out


def composition_windows(a: float, b: float, order_index: int) -> list[tuple[float, float]]:
    """Signed sub-windows of [a, b] for the (2n+1)th-order composition.

    Each level splits a window at a + s*h and a + (1-s)*h; the middle
    window runs backward.
    """
    if order_index == 0:
        return [(a, b)]
    s = 1.0 / (2.0 - 2.0 ** (1.0 / (2 * order_index + 1)))
    h = b - a
    m1, m2 = a + s * h, a + (1.0 - s) * h
    return (
        composition_windows(a, m1, order_index - 1)
        + composition_windows(m1, m2, order_index - 1)
        + composition_windows(m2, b, order_index - 1)
    )


def _apply_segments(segments: Sequence[Segment], cache: EigenCache, u: np.ndarray) -> np.ndarray:
    for seg in segments:
        u = expm_eig(cache.get(seg.pattern), seg.duration) @ u
    return u


def propagate_interval(
    system: ControlSystem,
    widths_m: Sequence[float],
    tau: float,
    cache: EigenCache | None = None,
) -> np.ndarray:
    """Unitary for one interval: ordered product of cached segment exponentials."""
    cache = cache if cache is not None else EigenCache(system)
    u = np.eye(system.dim, dtype=np.complex128)
    return _apply_segments(interval_segments(widths_m, tau), cache, u)


def propagate_train(
    system: ControlSystem,
    train: PulseTrain,
    cache: EigenCache | None = None,
    order: int = 0,
) -> np.ndarray:
    """Full-train unitary; interval M is applied last (leftmost factor).

    order >= 1 expands each interval with the proportional triple-copy
    composition (see higher_order_segments). Performs no generic matrix
    exponentials.
    """
    if train.num_controls != system.num_controls:
        raise DimensionMismatch("train control count != system control count")
    cache = cache if cache is not None else EigenCache(system)
    u = np.eye(system.dim, dtype=np.complex128)
    for m in range(train.num_intervals):
        segs = segments_for_train(train, m)
        if order:
            segs = higher_order_segments(segs, order)
        u = _apply_segments(segs, cache, u)
    return u


def propagate_hard_pulse(
    system: ControlSystem,
    train: PulseTrain,
    cache: EigenCache | None = None,
) -> np.ndarray:
    """Hard-pulse (kappa -> infinity) limit: the symmetric Suzuki-Trotter
    product over the smaller generator set {H0, xi_k H_k}."""
    if train.num_controls != system.num_controls:
        raise DimensionMismatch("train control count != system control count")
    if train.level_scheme != "three_level":
        raise ValueError("hard-pulse limit is defined for three-level trains")
    cache = cache if cache is not None else EigenCache(system)
    dim = system.dim
    zero = (0,) * system.num_controls
    u = np.eye(dim, dtype=np.complex128)
    for m in range(train.num_intervals):
        halves = [expm_eig(cache.get(zero), train.tau / 2.0)]
        for k in range(system.num_controls):
            halves.append(expm_eig(cache.get_control(k), train.widths[k, m] / 2.0))
        u_m = np.eye(dim, dtype=np.complex128)
        for factor in halves + halves[::-1]:
            u_m = u_m @ factor
        u = u_m @ u
    return u


def propagate_composed(
    system: ControlSystem,
    waveforms: Sequence,
    tau: float,
    num_intervals: int,
    xi: Sequence[float],
    order_index: int = 1,
    cache: EigenCache | None = None,
) -> np.ndarray:
    """(2n+1)th-order pulse propagation driven by the waveforms themselves.

    Each interval is split into the composition sub-windows and every
    sub-window gets its own pulse widths from the waveform integral over
    that (possibly backward) window. This is the accuracy-upgrade path;
    the proportional rescaling in higher_order_segments only matches it
    when the controls are constant within each interval.
    """
    cache = cache if cache is not None else EigenCache(system)
    xi = np.asarray(xi, dtype=float)
    u = np.eye(system.dim, dtype=np.complex128)
    for m in range(num_intervals):
        for a, b in composition_windows(m * tau, (m + 1) * tau, order_index):
            widths = [wf.integral(a, b) / x for wf, x in zip(waveforms, xi)]
            u = _apply_segments(interval_segments(widths, b - a), cache, u)
    return u


def propagate_staircase(
    system: ControlSystem,
    values: np.ndarray,
    tau: float,
    method: str = "pade",
) -> np.ndarray:
    """Conventional piecewise-constant (AWG staircase) propagator.

    values is K x M: one amplitude per control per interval. method
    'pade' exponentiates each interval generator generically; 'eig'
    diagonalizes each interval afresh (no caching: the generator set is
    a continuum).
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] != system.num_controls:
        raise DimensionMismatch("staircase row count != control count")
    u = np.eye(system.dim, dtype=np.complex128)
    for m in range(values.shape[1]):
        h = system.h0.copy()
        for k, ctl in enumerate(system.controls):
            h += values[k, m] * ctl.h
        if method == "pade":
            u = expm_pade(h, tau) @ u
        elif method == "eig":
            u = expm_eig(eig_hermitian(h), tau) @ u
        else:
            raise ValueError(f"unknown method {method!r}")
    return u


def _signal_values(signal, t: np.ndarray) -> np.ndarray:
    if hasattr(signal, "value"):
        return np.asarray(signal.value(t), dtype=float)
    return np.asarray(signal(t), dtype=float)


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """Product mats[-1] @ ... @ mats[0] via pairwise tree reduction."""
    while mats.shape[0] > 1:
        body, tail = (mats[:-1], mats[-1:]) if mats.shape[0] % 2 else (mats, None)
        mats = np.matmul(body[1::2], body[0::2])
        if tail is not None:
            mats = np.concatenate([mats, tail])
    return mats[0]


def _midpoint_unitary(system: ControlSystem, signals, edges: np.ndarray) -> np.ndarray:
    mids = 0.5 * (edges[:-1] + edges[1:])
    steps = np.diff(edges)
    h = np.broadcast_to(system.h0, (mids.size, *system.h0.shape)).copy()
    for ctl, sig in zip(system.controls, signals):
        h += _signal_values(sig, mids)[:, None, None] * ctl.h
    vals, vecs = np.linalg.eigh(h)
    phases = np.exp(-1j * steps[:, None] * vals)
    us = np.matmul(vecs * phases[:, None, :], vecs.conj().swapaxes(-1, -2))
    return _ordered_product(us)


def reference_oracle(
    system: ControlSystem,
    signals: Sequence,
    t_final: float,
    target_accuracy: float = 1e-10,
    breakpoints: Sequence[float] | None = None,
    initial_steps: int = 32,
    max_refinements: int = 20,
) -> np.ndarray:
    """High-accuracy propagator for arbitrary signals u_k(t).

    Midpoint-sampled piecewise-constant propagation; every step is halved
    until two successive results differ by less than target_accuracy in
    Frobenius norm. Known discontinuity times may be passed as
    breakpoints so the grid aligns with them from the start. Raises
    NoConvergence after max_refinements halvings.
    """
    if target_accuracy < 1e-12:
        raise ValueError("target_accuracy must be >= 1e-12")
    if len(signals) != system.num_controls:
        raise DimensionMismatch("signal count != control count")
    edges = np.linspace(0.0, t_final, initial_steps + 1)
    if breakpoints is not None:
        inside = [b for b in breakpoints if 1e-12 < b < t_final - 1e-12]
        edges = np.unique(np.concatenate([edges, np.asarray(inside, dtype=float)]))
    previous = _midpoint_unitary(system, signals, edges)
    for _ in range(max_refinements):
        mids = 0.5 * (edges[:-1] + edges[1:])
        edges = np.sort(np.concatenate([edges, mids]))
        current = _midpoint_unitary(system, signals, edges)
        if float(np.linalg.norm(current - previous)) < target_accuracy:
            return current
        previous = current
    raise NoConvergence(
        f"oracle did not reach {target_accuracy:g} after {max_refinements} refinements"
    )


def propagate_state(
    system: ControlSystem,
    train: PulseTrain,
    psi0: np.ndarray,
    cache: EigenCache | None = None,
) -> np.ndarray:
    """Propagate a unit state vector with matrix-vector products only."""
    psi = np.asarray(psi0, dtype=np.complex128).copy()
    if abs(np.linalg.norm(psi) - 1.0) > 1e-12:
        raise ValueError("psi0 must be normalized")
    if train.num_controls != system.num_controls:
        raise DimensionMismatch("train control count != system control count")
    cache = cache if cache is not None else EigenCache(system)
    for m in range(train.num_intervals):
        for seg in segments_for_train(train, m):
            pair = cache.get(seg.pattern)
            psi = pair.basis @ (np.exp(-1j * seg.duration * pair.eigenvalues) * (pair.basis.conj().T @ psi))
    return psi


@dataclass(frozen=True)
class JitterConfig:
    """Gaussian pulse-width jitter: sigma per control (ns), optionally per
    pulse as a K x M array. trials >= 1; seed fixes the draw."""

    sigma: np.ndarray
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        if np.any(s < 0):
            raise ValueError("sigma must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "sigma", s)


@dataclass(frozen=True)
class JitterResult:
    mean_interval_deviation: np.ndarray  # (M, d, d): mean of U_ideal_m - U_perturbed_m
    fidelities: np.ndarray               # per-trial |tr(U_ideal^dag U_pert)|^2 / d^2
    u_ideal: np.ndarray

    @property
    def mean_fidelity(self) -> float:
        return float(np.mean(self.fidelities))

    @property
    def fidelity_loss(self) -> float:
        return 1.0 - self.mean_fidelity


def jitter_expectation(system: ControlSystem, sigma: Sequence[float]) -> np.ndarray:
    """Leading-order expected per-interval deviation: sum_k sigma_k^2 xi_k^2 H_k^2 / 2."""
    sigma = np.asarray(sigma, dtype=float)
    out = np.zeros((system.dim, system.dim), dtype=np.complex128)
    for s, ctl in zip(sigma, system.controls):
        out += 0.5 * (s * ctl.xi) ** 2 * (ctl.h @ ctl.h)
    return out


def _jitter_chunk(system, train, cache, deltas, ideal, u_ideal):
    num_m = train.num_intervals
    dim = system.dim
    dev_sum = np.zeros((num_m, dim, dim), dtype=np.complex128)
    fidelities = np.empty(deltas.shape[0])
    for t in range(deltas.shape[0]):
        widths = np.clip(train.widths + deltas[t], -train.tau, train.tau)
        u_tot = np.eye(dim, dtype=np.complex128)
        for m in range(num_m):
            u_m = propagate_interval(system, widths[:, m], train.tau, cache)
            dev_sum[m] += ideal[m] - u_m
            u_tot = u_m @ u_tot
        overlap = np.trace(u_ideal.conj().T @ u_tot)
        fidelities[t] = abs(overlap) ** 2 / dim**2
    return dev_sum, fidelities


def jitter_monte_carlo(
    system: ControlSystem,
    train: PulseTrain,
    cfg: JitterConfig,
    cache: EigenCache | None = None,
    workers: int = 1,
) -> JitterResult:
    """Sample Gaussian width perturbations, re-propagate, and collect the
    per-interval mean deviation plus the fidelity distribution.

    Perturbed widths are clamped to |w| <= tau. All perturbations are drawn
    up front, so results are deterministic for a fixed seed regardless of
    the worker count.
    """
    if train.level_scheme != "three_level":
        raise ValueError("jitter model applies to three-level trains")
    cache = cache if cache is not None else EigenCache(system)
    num_k, num_m = train.num_controls, train.num_intervals
    sigma = cfg.sigma if cfg.sigma.ndim == 2 else np.atleast_1d(cfg.sigma)[:, None]
    sigma = np.broadcast_to(sigma, (num_k, num_m))

    ideal = [
        propagate_interval(system, train.widths[:, m], train.tau, cache)
        for m in range(num_m)
    ]
    u_ideal = np.eye(system.dim, dtype=np.complex128)
    for u_m in ideal:
        u_ideal = u_m @ u_ideal

    rng = np.random.default_rng(cfg.seed)
    deltas = rng.normal(size=(cfg.trials, num_k, num_m)) * sigma
    workers = max(1, min(workers, cfg.trials))
    if workers == 1:
        dev_sum, fidelities = _jitter_chunk(system, train, cache, deltas, ideal, u_ideal)
    else:
        chunks = np.array_split(deltas, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    lambda d: _jitter_chunk(system, train, cache, d, ideal, u_ideal),
                    chunks,
                )
            )
        dev_sum = sum(p[0] for p in parts)
        fidelities = np.concatenate([p[1] for p in parts])
    return JitterResult(dev_sum / cfg.trials, fidelities, u_ideal)


def system_to_json(system: ControlSystem) -> dict:
    return {
        "h0": matrix_to_json(system.h0),
        "controls": [
            {"h": matrix_to_json(c.h), "xi_rad_per_ns": c.xi} for c in system.controls
        ],
    }


def system_from_json(obj: dict) -> ControlSystem:
    h0 = matrix_from_json(obj["h0"])
    controls = tuple(
        Control(matrix_from_json(c["h"]), float(c["xi_rad_per_ns"]))
        for c in obj.get("controls", [])
    )
    return ControlSystem(h0, controls)
