"""Dense complex-matrix foundation: Hermitian eigendecompositions, matrix
exponentials, tensor products, norms, and the matrix JSON format.

Conventions: time in ns, energies/frequencies in rad/ns, so Hamiltonian
entries stay O(1). All matrices are dense complex128 ndarrays.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, DimensionMismatch, NotHermitian

__all__ = [
    "EigenPair",
    "is_hermitian",
    "eig_hermitian",
    "expm_eig",
    "expm_pade",
    "kron",
    "frob_dist",
    "expm_call_count",
    "reset_expm_count",
    "matrix_to_json",
    "matrix_from_json",
]

# Generic matrix-exponential calls are counted so propagation paths can
# prove they never fall back to scaling-and-squaring.
_expm_calls = 0


def expm_call_count() -> int:
    """Number of generic (Pade) matrix-exponential calls since last reset."""
    return _expm_calls


def reset_expm_count() -> None:
    global _expm_calls
    _expm_calls = 0


class EigenPair(NamedTuple):
    """Eigendecomposition H = basis @ diag(eigenvalues) @ basis†.

    eigenvalues are real (rad/ns), ascending; basis is unitary.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]


def as_matrix(m) -> np.ndarray:
    """Coerce to a square complex128 ndarray."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def is_hermitian(m, tol: float = 1e-10) -> bool:
    """True iff max|m - m†| <= tol entrywise."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_matrix(m)
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def eig_hermitian(m, tol: float = 1e-10) -> EigenPair:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises NotHermitian if the input fails the Hermiticity check and
    ConvergenceFailure if the underlying iterative solver does not converge.
    Deterministic: identical inputs produce bitwise-identical output.
    """
    a = as_matrix(m)
    if not is_hermitian(a, tol):
        raise NotHermitian("matrix is not Hermitian within %g" % tol)
    try:
        vals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return EigenPair(vals, vecs)


def expm_eig(e: EigenPair, t: float) -> np.ndarray:
    """exp(-i t H) from a precomputed eigendecomposition of H.

    Scalar exponentials plus two matrix products; the result is unitary.
    """
    phases = np.exp(-1j * t * e.eigenvalues)
    return (e.basis * phases) @ e.basis.conj().T


def expm_pade(m, t: float = 1.0) -> np.ndarray:
    """exp(-i t m) via scaling-and-squaring (Pade), the conventional baseline.

    Works for general square m; increments the generic-expm call counter.
    """
    global _expm_calls
    _expm_calls += 1
    a = as_matrix(m)
    return scipy.linalg.expm(-1j * t * a)


def kron(a, b) -> np.ndarray:
    """Kronecker product."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def frob_dist(a, b) -> float:
    """Frobenius distance ||a - b||_F."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def matrix_to_json(m) -> dict:
    """JSON form: {"dim": d, "re": [[...]], "im": [[...]]} (row-major)."""
    a = as_matrix(m)
    return {
        "dim": int(a.shape[0]),
        "re": a.real.tolist(),
        "im": a.imag.tolist(),
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    d = int(obj["dim"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.shape != (d, d) or im.shape != (d, d):
        raise DimensionMismatch(
            f"matrix JSON claims dim {d} but parts have shapes {re.shape}, {im.shape}"
        )
    return re + 1j * im
