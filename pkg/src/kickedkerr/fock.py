"""Truncated Fock-basis operators, states and basic observables.

Everything here works on plain numpy arrays: an operator or a density
matrix is a dim x dim complex128 array over the number basis
|0>, ..., |dim-1>.  The cutoff makes the displacement operator only
approximately unitary; `displacement` checks the unitarity defect on the
block of levels that truncation cannot have corrupted and raises
`TruncationError` when the requested amplitude is too large for the basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm


class TruncationError(Exception):
    """Requested operation is not representable in the truncated basis."""


class DimensionMismatch(Exception):
    """Operands live in Fock spaces of different dimension."""


@dataclass(frozen=True)
class HilbertSpec:
    """Fock-space cutoff: the basis is |0>, ..., |dim-1>."""

    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"Fock cutoff must be >= 2, got {self.dim}")


def annihilation(spec: HilbertSpec) -> np.ndarray:
    """Photon annihilation operator: <m|a|n> = sqrt(n) delta_{m,n-1}."""
    return np.diag(np.sqrt(np.arange(1, spec.dim)), k=1).astype(np.complex128)


def creation(spec: HilbertSpec) -> np.ndarray:
    """Photon creation operator, the conjugate transpose of `annihilation`."""
    return annihilation(spec).conj().T


def number(spec: HilbertSpec) -> np.ndarray:
    """Number operator a^dag a = diag(0, 1, ..., dim-1)."""
    return np.diag(np.arange(spec.dim, dtype=np.float64)).astype(np.complex128)


def parity(spec: HilbertSpec) -> np.ndarray:
    """Photon-number parity diag((-1)^n)."""
    return np.diag((-1.0) ** np.arange(spec.dim)).astype(np.complex128)


def truncation_guard(alpha: complex, dim: int) -> int:
    """Number of top basis states excluded from unitarity checks.

    Truncating the basis corrupts the highest levels of exp(alpha a^dag -
    conj(alpha) a); the corrupted band grows with |alpha| sqrt(dim).
    """
    return math.ceil(4.0 * abs(alpha) * math.sqrt(dim))


def displacement(alpha: complex, spec: HilbertSpec, defect_tol: float = 1e-6) -> np.ndarray:
    """Displacement operator D(alpha) = exp(alpha a^dag - conj(alpha) a).

    Computed by matrix exponential so the same code path serves coherent
    displacements and the kick unitary.  The retained block (all levels
    below the truncation guard band) must be unitary to within
    `defect_tol`, otherwise TruncationError is raised.
    """
    dim = spec.dim
    guard = truncation_guard(alpha, dim)
    keep = dim - guard
    if keep < 1:
        raise TruncationError(
            f"|alpha|={abs(alpha):.3g} too large for dim={dim}: "
            f"guard band {guard} leaves no checkable block"
        )
    a = annihilation(spec)
    D = expm(alpha * a.conj().T - np.conjugate(alpha) * a)
    defect = np.abs((D.conj().T @ D)[:keep, :keep] - np.eye(keep)).max()
    if defect > defect_tol:
        raise TruncationError(
            f"unitarity defect {defect:.3e} on retained {keep}x{keep} block "
            f"exceeds {defect_tol:.1e} (|alpha|={abs(alpha):.3g}, dim={dim})"
        )
    return D


def vacuum(spec: HilbertSpec) -> np.ndarray:
    """Density matrix of the ground state |0><0|."""
    rho = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    rho[0, 0] = 1.0
    return rho


def fock_density(n: int, spec: HilbertSpec) -> np.ndarray:
    """Density matrix of the number state |n><n|."""
    if not 0 <= n < spec.dim:
        raise ValueError(f"Fock index {n} outside basis of dim {spec.dim}")
    rho = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    rho[n, n] = 1.0
    return rho


def coherent_density(alpha: complex, spec: HilbertSpec) -> np.ndarray:
    """Density matrix of the truncated coherent state D(alpha)|0><0|D(-alpha)."""
    D = displacement(alpha, spec)
    psi = D[:, 0]
    return np.outer(psi, psi.conj())


def mean_photon_number(rho: np.ndarray) -> float:
    """Tr[n rho]; real up to the Hermiticity of rho."""
    return float(np.real(np.arange(rho.shape[0]) @ np.real(np.diag(rho))))


def apply_unitary(rho: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Conjugate rho -> U rho U^dag and re-symmetrize.

    Averaging with the conjugate transpose is cheap drift control for
    long kick chains.
    """
    if rho.shape != U.shape or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatch(f"rho {rho.shape} vs U {U.shape}")
    out = U @ rho @ U.conj().T
    return 0.5 * (out + out.conj().T)


def hermitize(rho: np.ndarray) -> np.ndarray:
    """Average rho with its conjugate transpose."""
    return 0.5 * (rho + rho.conj().T)


def check_density(rho: np.ndarray, herm_tol: float = 1e-12, trace_tol: float = 1e-9,
                  eig_tol: float = -1e-9) -> None:
    """Validate density-matrix invariants, raising ValueError on violation."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > herm_tol:
        raise ValueError(f"Hermiticity defect {herm:.3e} exceeds {herm_tol:.1e}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"trace {tr!r} deviates from 1 by more than {trace_tol:.1e}")
    w = np.linalg.eigvalsh(hermitize(rho))
    if w.min() < eig_tol:
        raise ValueError(f"negative eigenvalue {w.min():.3e} below {eig_tol:.1e}")
