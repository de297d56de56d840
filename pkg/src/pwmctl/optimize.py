"""Average-gate-fidelity objective and the pulse-width optimizer.

The pulse widths are the decision variables; amplitudes stay fixed. The
objective is the leakage-aware average fidelity

    J = ( tr[U P U^dag P] + |tr[Ug^dag U P]|^2 ) / ( 2^N (2^N + 1) )

with P the qubit-subspace projector and Ug the embedded target. The
optimizer is finite-difference gradient ascent with per-parameter moment
scaling (Adam-style), backtracking on fidelity decrease, and box
projection onto |width| <= tau.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .devices import DeviceSpec, TargetGate, embed_gate, qubit_projector
from .errors import DimensionMismatch
from .propagate import ControlSystem, EigenCache, propagate_interval, propagate_staircase
from .pwm import PulseTrain, staircase_from_train

__all__ = [
    "Objective",
    "OptimizerConfig",
    "OptimizationResult",
    "objective_for_gate",
    "fidelity",
    "gradient_fd",
    "random_train",
    "optimize",
    "evaluate_staircase_conversion",
]


@dataclass(frozen=True)
class Objective:
    """Everything needed to score a propagator against a target gate."""

    system: ControlSystem
    target: TargetGate
    projector: np.ndarray
    n_qubits: int

    def __post_init__(self):
        d = self.system.dim
        if self.target.embedded.shape != (d, d) or self.projector.shape != (d, d):
            raise DimensionMismatch("target/projector dimensions do not match system")
        object.__setattr__(
            self, "_qubit_idx", np.flatnonzero(np.real(np.diag(self.projector)) > 0.5)
        )


def objective_for_gate(system: ControlSystem, spec: DeviceSpec, gate) -> Objective:
    target = embed_gate(gate, spec)
    return Objective(
        system=system,
        target=target,
        projector=qubit_projector(spec),
        n_qubits=spec.atoms,
    )


def fidelity(obj: Objective, u: np.ndarray) -> float:
    """Average gate fidelity J in [0, 1]; 1 iff u acts as the target on the
    qubit subspace up to a global phase."""
    if u.shape != obj.projector.shape:
        raise DimensionMismatch("propagator dimension does not match objective")
    idx = obj._qubit_idx
    block = u[np.ix_(idx, idx)]
    gate_block = obj.target.embedded[np.ix_(idx, idx)]
    trace_pupp = complex(np.einsum("ij,ij->", block, block.conj()))
    if abs(trace_pupp.imag) > 1e-10:
        raise ValueError(f"tr[UPU+P] has imaginary residue {trace_pupp.imag:g}")
    overlap = complex(np.vdot(gate_block, block))
    n_q = 2**obj.n_qubits
    return float((trace_pupp.real + abs(overlap) ** 2) / (n_q * (n_q + 1)))


def _interval_unitaries(system, train, cache) -> list[np.ndarray]:
    return [
        propagate_interval(system, train.widths[:, m], train.tau, cache)
        for m in range(train.num_intervals)
    ]


def _chain(mats, dim) -> np.ndarray:
    u = np.eye(dim, dtype=np.complex128)
    for m in mats:
        u = m @ u
    return u


def gradient_fd(
    obj: Objective,
    train: PulseTrain,
    h: float,
    cache: EigenCache | None = None,
) -> np.ndarray:
    """Central finite-difference dJ/dwidth, K x M.

    Probes clamp to [-tau, tau]; only the probed interval is re-propagated,
    the rest comes from cached forward/backward partial products.
    """
    if h > train.tau / 100.0:
        raise ValueError("gradient step h must be <= tau/100")
    cache = cache if cache is not None else EigenCache(obj.system)
    system = obj.system
    dim = system.dim
    num_k, num_m = train.num_controls, train.num_intervals
    units = _interval_unitaries(system, train, cache)

    prefix = [np.eye(dim, dtype=np.complex128)]
    for m in range(num_m - 1):
        prefix.append(units[m] @ prefix[m])
    suffix = [None] * num_m
    suffix[num_m - 1] = np.eye(dim, dtype=np.complex128)
    for m in range(num_m - 2, -1, -1):
        suffix[m] = suffix[m + 1] @ units[m + 1]

    grad = np.zeros((num_k, num_m))
    tau = train.tau
    for m in range(num_m):
        base = train.widths[:, m].copy()
        for k in range(num_k):
            w_hi = min(base[k] + h, tau)
            w_lo = max(base[k] - h, -tau)
            if w_hi == w_lo:
                continue
            probe = base.copy()
            probe[k] = w_hi
            u_hi = suffix[m] @ propagate_interval(system, probe, tau, cache) @ prefix[m]
            probe[k] = w_lo
            u_lo = suffix[m] @ propagate_interval(system, probe, tau, cache) @ prefix[m]
            grad[k, m] = (fidelity(obj, u_hi) - fidelity(obj, u_lo)) / (w_hi - w_lo)
    return grad


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam-style ascent settings. h is the finite-difference step (ns)."""

    max_iterations: int = 500
    h: float = 1e-4
    learning_rate: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-12
    tolerance: float = 1e-9
    patience: int = 10
    max_backtracks: int = 25
    seed: int = 0
    target_j: float | None = None

    def __post_init__(self):
        if self.h <= 0 or self.tolerance <= 0:
            raise ValueError("h and tolerance must be positive")


@dataclass
class OptimizationResult:
    train: PulseTrain
    trajectory: list  # (iteration, J, wall_ms) per accepted iterate
    wall_time_s: float
    termination: str
    iterations: int

    @property
    def best_j(self) -> float:
        return self.trajectory[-1][1]


def random_train(
    tau: float, num_intervals: int, xi, seed: int = 0, shape: str = "rectangular"
) -> PulseTrain:
    """Seeded initial guess: widths uniform in [-tau/2, tau/2]."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rng = np.random.default_rng(seed)
    widths = rng.uniform(-tau / 2.0, tau / 2.0, size=(xi.size, num_intervals))
    return PulseTrain(tau=tau, widths=widths, xi=xi, shape=shape)


def optimize(
    obj: Objective,
    initial: PulseTrain,
    cfg: OptimizerConfig | None = None,
    cache: EigenCache | None = None,
) -> OptimizationResult:
    """Maximize J over pulse widths. Accepted iterates never decrease J;
    a step that would is retried with a halved learning rate, and the run
    stalls out once backtracking is exhausted. Deterministic."""
    cfg = cfg if cfg is not None else OptimizerConfig()
    cache = cache if cache is not None else EigenCache(obj.system)
    t0 = time.perf_counter()

    def rebuilt(widths):
        return PulseTrain(
            tau=initial.tau, widths=widths, xi=initial.xi, shape=initial.shape
        )

    def score(widths):
        u = _chain(
            _interval_unitaries(obj.system, rebuilt(widths), cache), obj.system.dim
        )
        return fidelity(obj, u)

    tau = initial.tau
    widths = initial.widths.copy()
    j_cur = score(widths)
    trajectory = [(0, j_cur, 0.0)]
    m_mom = np.zeros_like(widths)
    v_mom = np.zeros_like(widths)
    lr = cfg.learning_rate
    flat_streak = 0
    termination = "max_iterations"
    iteration = 0

    if cfg.target_j is not None and j_cur >= cfg.target_j:
        termination = "target"

    while termination == "max_iterations" and iteration < cfg.max_iterations:
        iteration += 1
        grad = gradient_fd(obj, rebuilt(widths), cfg.h, cache)
        m_mom = cfg.beta1 * m_mom + (1 - cfg.beta1) * grad
        v_mom = cfg.beta2 * v_mom + (1 - cfg.beta2) * grad**2
        m_hat = m_mom / (1 - cfg.beta1**iteration)
        v_hat = v_mom / (1 - cfg.beta2**iteration)
        direction = m_hat / (np.sqrt(v_hat) + cfg.epsilon)

        accepted = False
        for _ in range(cfg.max_backtracks + 1):
            trial = np.clip(widths + lr * direction, -tau, tau)
            j_new = score(trial)
            if j_new >= j_cur:
                accepted = True
                break
            lr *= 0.5
        if not accepted:
            termination = "stall"
            break

        gain = j_new - j_cur
        widths, j_cur = trial, j_new
        trajectory.append((iteration, j_cur, (time.perf_counter() - t0) * 1e3))
        lr = min(lr * 1.1, cfg.learning_rate * 10.0)

        if cfg.target_j is not None and j_cur >= cfg.target_j:
            termination = "target"
            break
        flat_streak = flat_streak + 1 if gain < cfg.tolerance else 0
        if flat_streak >= cfg.patience:
            termination = "converged"
            break

    return OptimizationResult(
        train=rebuilt(widths),
        trajectory=trajectory,
        wall_time_s=time.perf_counter() - t0,
        termination=termination,
        iterations=iteration,
    )


def evaluate_staircase_conversion(obj: Objective, train: PulseTrain) -> float:
    """J of the train converted to its staircase waveform (the AWG version)."""
    values = staircase_from_train(train)
    u = propagate_staircase(obj.system, values, train.tau, method="eig")
    return fidelity(obj, u)
