"""Superconducting transmon-chain models: Kerr-nonlinear atoms with
nearest-neighbor coupling, qubit-subspace projectors, and embedded target
gates.

Works in the doubly rotating frame at the qubit frequency, so the drift
contains only anharmonicity and coupling. Frequencies entered in MHz are
converted to rad/ns (omega = 2*pi * f_MHz * 1e-3) at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedInput, NotUnitary
from .linalg import kron
from .propagate import Control, ControlSystem

__all__ = [
    "DeviceSpec",
    "TargetGate",
    "mhz_to_rad_per_ns",
    "build_chain",
    "qubit_projector",
    "embed_gate",
    "device_to_json",
    "device_from_json",
]


def mhz_to_rad_per_ns(f_mhz: float) -> float:
    return 2.0 * math.pi * f_mhz * 1e-3


DEFAULT_ETA = mhz_to_rad_per_ns(-200.0)
DEFAULT_G = mhz_to_rad_per_ns(30.0)
DEFAULT_XI = mhz_to_rad_per_ns(100.0)


@dataclass(frozen=True)
class DeviceSpec:
    """Homogeneous chain of Kerr-nonlinear artificial atoms.

    atoms: chain length N; levels: truncation per atom; anharmonicity eta
    and coupling g in rad/ns; axes: control axes enabled on every atom,
    with amplitude xi[axis] (rad/ns).
    """

    atoms: int
    levels: int = 3
    anharmonicity: float = DEFAULT_ETA
    coupling: float = DEFAULT_G
    axes: tuple[str, ...] = ("x", "y")
    xi: dict = field(default_factory=lambda: {"x": DEFAULT_XI, "y": DEFAULT_XI})

    def __post_init__(self):
        if self.atoms < 1:
            raise ValueError("need at least one atom")
        if self.levels < 2:
            raise ValueError("need at least two levels per atom")
        axes = tuple(self.axes)
        if not axes or any(a not in ("x", "y", "z") for a in axes):
            raise ValueError("axes must be a non-empty subset of {x, y, z}")
        object.__setattr__(self, "axes", axes)
        missing = [a for a in axes if a not in self.xi]
        if missing:
            raise ValueError(f"missing xi for axes {missing}")

    @property
    def dim(self) -> int:
        return self.levels**self.atoms


@dataclass(frozen=True)
class TargetGate:
    """A qubit-subspace gate and its full-space embedding (zero on leakage)."""

    name: str
    matrix: np.ndarray    # 2^N x 2^N unitary on the qubit block
    embedded: np.ndarray  # d x d, acts as `matrix` on qubit basis states
    atoms: int
    levels: int


def _ladder(levels: int) -> np.ndarray:
    a = np.zeros((levels, levels), dtype=np.complex128)
    for n in range(1, levels):
        a[n - 1, n] = math.sqrt(n)
    return a


def _site_operator(op: np.ndarray, site: int, atoms: int, levels: int) -> np.ndarray:
    eye = np.eye(levels, dtype=np.complex128)
    out = np.eye(1, dtype=np.complex128)
    for n in range(atoms):
        out = kron(out, op if n == site else eye)
    return out


def build_chain(spec: DeviceSpec) -> ControlSystem:
    """Drift = Kerr anharmonicity + nearest-neighbor hopping; controls per
    atom and axis: x -> a + a^dag, y -> i(a - a^dag), z -> a^dag a.

    Controls are ordered atom-major, axes in the order given by the spec.
    """
    a = _ladder(spec.levels)
    adag = a.conj().T
    kerr = adag @ adag @ a @ a

    h0 = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    for n in range(spec.atoms):
        h0 += 0.5 * spec.anharmonicity * _site_operator(kerr, n, spec.atoms, spec.levels)
    for n in range(spec.atoms - 1):
        left = _site_operator(adag, n, spec.atoms, spec.levels)
        right = _site_operator(a, n + 1, spec.atoms, spec.levels)
        hop = left @ right
        h0 += spec.coupling * (hop + hop.conj().T)

    axis_ops = {
        "x": a + adag,
        "y": 1j * (a - adag),
        "z": adag @ a,
    }
    controls = []
    for n in range(spec.atoms):
        for axis in spec.axes:
            h = _site_operator(axis_ops[axis], n, spec.atoms, spec.levels)
            controls.append(Control(h, float(spec.xi[axis])))
    return ControlSystem(h0, tuple(controls))


def qubit_projector(spec: DeviceSpec) -> np.ndarray:
    """Diagonal projector onto the qubit subspace (every atom in {0, 1})."""
    keep = np.ones(spec.dim)
    for idx in range(spec.dim):
        digits = idx
        for _ in range(spec.atoms):
            if digits % spec.levels > 1:
                keep[idx] = 0.0
                break
            digits //= spec.levels
    return np.diag(keep).astype(np.complex128)


_GATE_BUILDERS = {
    "NOT": (1, lambda: np.array([[0, 1], [1, 0]], dtype=np.complex128)),
    "CNOT": (
        2,
        lambda: np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
            dtype=np.complex128,
        ),
    ),
    "CCZ": (3, lambda: np.diag(np.array([1.0] * 7 + [-1.0], dtype=np.complex128))),
}


def _qubit_indices(spec: DeviceSpec) -> np.ndarray:
    """Full-space index of each qubit basis state |b_1 ... b_N>, atom 1 most
    significant."""
    out = []
    for q in range(2**spec.atoms):
        idx = 0
        for n in range(spec.atoms):
            bit = (q >> (spec.atoms - 1 - n)) & 1
            idx = idx * spec.levels + bit
        out.append(idx)
    return np.array(out)


def embed_gate(gate, spec: DeviceSpec) -> TargetGate:
    """Embed a named gate (NOT / CNOT / CCZ) or an explicit 2^N x 2^N unitary
    into the full chain space; leakage levels are annihilated."""
    if isinstance(gate, str):
        name = gate.upper()
        if name not in _GATE_BUILDERS:
            raise MalformedInput(f"unknown gate {gate!r}; choose NOT, CNOT, or CCZ")
        atoms, builder = _GATE_BUILDERS[name]
        if spec.atoms != atoms:
            raise MalformedInput(f"{name} gate needs {atoms} atom(s), spec has {spec.atoms}")
        block = builder()
    else:
        name = "custom"
        block = np.asarray(gate, dtype=np.complex128)
        if block.shape != (2**spec.atoms, 2**spec.atoms):
            raise MalformedInput(
                f"gate block must be {2**spec.atoms} x {2**spec.atoms}, got {block.shape}"
            )
    if np.linalg.norm(block @ block.conj().T - np.eye(block.shape[0])) > 1e-12 * block.shape[0]:
        raise NotUnitary("gate block is not unitary")
    embedded = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    qidx = _qubit_indices(spec)
    embedded[np.ix_(qidx, qidx)] = block
    return TargetGate(name=name, matrix=block, embedded=embedded, atoms=spec.atoms, levels=spec.levels)


def device_to_json(spec: DeviceSpec) -> dict:
    per_mhz = 1.0 / mhz_to_rad_per_ns(1.0)
    return {
        "n": spec.atoms,
        "levels": spec.levels,
        "eta_mhz": spec.anharmonicity * per_mhz,
        "g_mhz": spec.coupling * per_mhz,
        "axes": list(spec.axes),
        "xi_mhz": {a: spec.xi[a] * per_mhz for a in spec.axes},
    }


def device_from_json(obj: dict) -> DeviceSpec:
    try:
        axes = tuple(obj.get("axes", ["x", "y"]))
        xi_mhz = obj.get("xi_mhz", {a: 100.0 for a in axes})
        return DeviceSpec(
            atoms=int(obj["n"]),
            levels=int(obj.get("levels", 3)),
            anharmonicity=mhz_to_rad_per_ns(float(obj.get("eta_mhz", -200.0))),
            coupling=mhz_to_rad_per_ns(float(obj.get("g_mhz", 30.0))),
            axes=axes,
            xi={a: mhz_to_rad_per_ns(float(xi_mhz[a])) for a in axes},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"bad device JSON: {exc}") from exc
