"""
Truncated Fock-Space Linear Algebra

This module provides the state and operator types every other module works
with, and the fundamental single-mode unitaries:

- annihilation / creation / number operators
- displacement D(a) = exp(a a^dag - a* a)
- squeezing S(z) = exp[(z/2) a^dag^2 - (z*/2) a^2]
- number rotation R(theta) = exp(-i theta n)

Conventions (fixed project-wide):
    x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)), hbar = 1,
    vacuum quadrature variance 1/2, phase-space amplitude a = (x + i p)/sqrt(2).

With the squeezing generator above, S(0.5)|0> has x-variance (1/2)e^{+1}.

Required packages: numpy, scipy
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy.linalg import expm

from config import get_config
from errors import (DimensionMismatchError, InvalidDimensionError,
                    InvalidParameterError, InvalidStateError,
                    TruncationRiskError)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10


def check_dim(dim: int) -> int:
    """Validate a Fock truncation (number of retained levels)."""
    if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)) or dim < 2:
        raise InvalidDimensionError(f"Fock dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


def _hermitize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


@dataclass(frozen=True)
class PhaseSpacePoint:
    """A point (x, p) of phase space in the hbar = 1 convention."""
    x: float
    p: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.p)):
            raise InvalidParameterError(f"Phase-space point must be finite, got ({self.x}, {self.p})")

    @property
    def amplitude(self) -> complex:
        """Complex amplitude a = (x + i p)/sqrt(2)."""
        return complex(self.x, self.p) / np.sqrt(2.0)

    @property
    def radius(self) -> float:
        return float(np.hypot(self.x, self.p))

    @property
    def angle(self) -> float:
        return float(np.arctan2(self.p, self.x))


@dataclass(frozen=True, eq=False)
class Operator:
    """A truncated Fock-basis operator."""
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidDimensionError(f"Operator must be square, got shape {m.shape}")
        check_dim(m.shape[0])
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "Operator":
        return Operator(self.matrix.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        if other.dim != self.dim:
            raise DimensionMismatchError(f"Operator dims differ: {self.dim} vs {other.dim}")
        return Operator(self.matrix @ other.matrix)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Truncated Fock-basis density matrix.

    Construction validates Hermiticity (1e-12), unit trace (1e-12) and
    positivity (eigenvalues >= -1e-10). The stored array is read-only.
    """
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidStateError(f"Density matrix must be square, got shape {m.shape}")
        check_dim(m.shape[0])
        if not np.all(np.isfinite(m)):
            raise InvalidStateError("Density matrix contains non-finite entries")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("Density matrix is not Hermitian")
        trace = np.trace(m).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"Density matrix trace is {trace!r}, expected 1")
        min_eig = np.linalg.eigvalsh(_hermitize(m)).min()
        if min_eig < -PSD_TOL:
            raise InvalidStateError(f"Density matrix has negative eigenvalue {min_eig:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __getitem__(self, index: Tuple[int, int]) -> complex:
        return complex(self.matrix[index])

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    @classmethod
    def from_pure(cls, vector: Iterable[complex]) -> "DensityMatrix":
        """Build |psi><psi| from a (possibly unnormalized) state vector."""
        psi = np.asarray(vector, dtype=complex)
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise InvalidStateError("Zero state vector")
        psi = psi / norm
        return cls(_hermitize(np.outer(psi, psi.conj())))

    @classmethod
    def from_unnormalized(cls, matrix: np.ndarray) -> "DensityMatrix":
        """Hermitize and trace-normalize a positive matrix."""
        m = _hermitize(np.asarray(matrix, dtype=complex))
        trace = np.trace(m).real
        if trace <= 0:
            raise InvalidStateError("Matrix has non-positive trace")
        return cls(m / trace)

    def to_record(self) -> dict:
        """Serialization record: dim plus row-major real and imaginary parts."""
        return {
            "dim": self.dim,
            "re": [float(v) for v in self.matrix.real.ravel()],
            "im": [float(v) for v in self.matrix.imag.ravel()],
        }

    @classmethod
    def from_record(cls, record: dict) -> "DensityMatrix":
        dim = check_dim(record["dim"])
        re = np.asarray(record["re"], dtype=float)
        im = np.asarray(record["im"], dtype=float)
        if re.size != dim * dim or im.size != dim * dim:
            raise InvalidStateError(f"Record holds {re.size}/{im.size} entries, expected {dim * dim}")
        return cls((re + 1j * im).reshape(dim, dim))


# ---------------------------------------------------------------------------
# Ladder operators
# ---------------------------------------------------------------------------

def annihilation_operator(dim: int) -> Operator:
    """Lowering operator with <n-1|a|n> = sqrt(n)."""
    dim = check_dim(dim)
    return Operator(np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1))


def creation_operator(dim: int) -> Operator:
    return annihilation_operator(dim).dagger()


def number_operator(dim: int) -> Operator:
    dim = check_dim(dim)
    return Operator(np.diag(np.arange(dim, dtype=float)))


def rotation_operator(theta: float, dim: int) -> Operator:
    """Phase-space rotation exp(-i theta n)."""
    dim = check_dim(dim)
    return Operator(np.diag(np.exp(-1j * theta * np.arange(dim))))


# ---------------------------------------------------------------------------
# Gaussian unitaries
# ---------------------------------------------------------------------------

def max_displacement(dim: int, guard: Optional[float] = None) -> float:
    """Largest |amplitude| the displacement guard admits at this truncation."""
    if guard is None:
        guard = get_config().displacement_guard
    return guard * np.sqrt(dim)


def displacement_operator(amplitude: complex, dim: int, guard: Optional[float] = None) -> Operator:
    """
    Displacement D(a) = exp(a a^dag - a* a) by scaling-and-squaring.

    The truncated generator is anti-Hermitian, so the result is exactly
    unitary on the truncated space; its entries match the untruncated
    operator where D(a)|n> has negligible weight at the top level, which
    the guard |a| <= guard * sqrt(dim) enforces for n < dim/2.

    Raises:
        TruncationRiskError: if |amplitude| exceeds the guard.
    """
    dim = check_dim(dim)
    amplitude = complex(amplitude)
    limit = max_displacement(dim, guard)
    if abs(amplitude) > limit + 1e-15:
        raise TruncationRiskError(
            f"|amplitude| = {abs(amplitude):.4f} exceeds {limit:.4f} for dim={dim}; raise dim")
    a = annihilation_operator(dim).matrix
    return Operator(expm(amplitude * a.conj().T - np.conj(amplitude) * a))


def max_squeezing(dim: int, guard: Optional[float] = None) -> float:
    """
    Largest |z| the squeezing guard admits: the configured guard (1.5) at
    dim >= squeezing_guard_min_dim (20), scaled down linearly below it.
    """
    config = get_config()
    if guard is None:
        guard = config.squeezing_guard
    return guard * min(1.0, dim / config.squeezing_guard_min_dim)


def squeezing_operator(z: complex, dim: int, guard: Optional[float] = None) -> Operator:
    """
    Squeezing S(z) = exp[(z/2) a^dag^2 - (z*/2) a^2].

    Real positive z stretches the x quadrature: Var(x) = (1/2) e^{2|z|}
    for S(z)|0>. Photon-number parity is conserved.

    Raises:
        TruncationRiskError: if |z| exceeds the squeezing guard for dim.
    """
    dim = check_dim(dim)
    z = complex(z)
    limit = max_squeezing(dim, guard)
    if abs(z) > limit + 1e-15:
        raise TruncationRiskError(f"|z| = {abs(z):.4f} exceeds {limit:.4f} for dim={dim}")
    a = annihilation_operator(dim).matrix
    a2 = a @ a
    return Operator(expm(0.5 * z * a2.conj().T - 0.5 * np.conj(z) * a2))


def apply_unitary(rho: DensityMatrix, unitary: Operator) -> DensityMatrix:
    """U rho U^dag."""
    if unitary.dim != rho.dim:
        raise DimensionMismatchError(f"Operator dim {unitary.dim} != state dim {rho.dim}")
    u = unitary.matrix
    return DensityMatrix(_hermitize(u @ rho.matrix @ u.conj().T))


def _work_dim(dim: int, radius: float) -> int:
    reach = np.sqrt(dim) + radius
    n = int(np.ceil(reach ** 2 + 8.0 * reach + 16.0))
    return max(dim, 32 * int(np.ceil(n / 32)))


@lru_cache(maxsize=16)
def _real_displacement_generator(work_dim: int) -> Tuple[np.ndarray, np.ndarray]:
    # H = i(a^dag - a) is Hermitian and D(r) = exp(-i r H) for real r.
    a = np.diag(np.sqrt(np.arange(1, work_dim, dtype=float)), k=1)
    eigvals, eigvecs = np.linalg.eigh(1j * (a.T - a))
    eigvals.setflags(write=False)
    eigvecs.setflags(write=False)
    return eigvals, eigvecs


def displacement_blocks(amplitudes: np.ndarray, dim: int,
                        max_work_dim: Optional[int] = None,
                        chunk: int = 512) -> np.ndarray:
    """
    Top-left dim x dim blocks of D(a) for many amplitudes at once.

    The exponential is taken in a padded working space sized from the
    largest |a| in each chunk, so the returned blocks agree with the
    untruncated operator. Used by phase-space evaluations that need the
    same displacement at thousands of points.

    Returns:
        np.ndarray: complex array of shape (len(amplitudes), dim, dim)

    Raises:
        TruncationRiskError: if the working space would exceed max_work_dim.
    """
    dim = check_dim(dim)
    if max_work_dim is None:
        max_work_dim = get_config().wigner_max_work_dim
    amps = np.atleast_1d(np.asarray(amplitudes, dtype=complex))
    out = np.empty((amps.size, dim, dim), dtype=complex)
    idx = np.arange(dim)
    offsets = idx[:, None] - idx[None, :]
    for start in range(0, amps.size, chunk):
        part = amps[start:start + chunk]
        radius = np.abs(part)
        work_dim = _work_dim(dim, float(radius.max(initial=0.0)))
        if work_dim > max_work_dim:
            raise TruncationRiskError(
                f"|amplitude| = {radius.max():.3f} needs a {work_dim}-level working space "
                f"(limit {max_work_dim})")
        eigvals, eigvecs = _real_displacement_generator(work_dim)
        top = eigvecs[:dim, :]
        phases = np.exp(-1j * radius[:, None] * eigvals[None, :])
        blocks = (top[None, :, :] * phases[:, None, :]) @ top.conj().T
        rotation = np.exp(1j * np.angle(part)[:, None, None] * offsets[None, :, :])
        out[start:start + chunk] = blocks * rotation
    return out


# ---------------------------------------------------------------------------
# States and scalar functionals
# ---------------------------------------------------------------------------

def fock_state(n: int, dim: int) -> DensityMatrix:
    dim = check_dim(dim)
    if not 0 <= n < dim:
        raise InvalidParameterError(f"Fock level {n} outside truncation {dim}")
    vec = np.zeros(dim, dtype=complex)
    vec[n] = 1.0
    return DensityMatrix.from_pure(vec)


def vacuum(dim: int) -> DensityMatrix:
    return fock_state(0, dim)


def coherent_state(amplitude: complex, dim: int) -> DensityMatrix:
    """D(a)|0><0|D(a)^dag."""
    column = displacement_operator(amplitude, dim).matrix[:, 0]
    return DensityMatrix.from_pure(column)


def embed(rho: DensityMatrix, dim: int) -> DensityMatrix:
    """Zero-pad rho into a larger truncation."""
    dim = check_dim(dim)
    if dim < rho.dim:
        raise DimensionMismatchError(f"Cannot embed dim {rho.dim} into smaller dim {dim}")
    if dim == rho.dim:
        return rho
    m = np.zeros((dim, dim), dtype=complex)
    m[:rho.dim, :rho.dim] = rho.matrix
    return DensityMatrix(m)


def truncate(rho: DensityMatrix, dim: int) -> Tuple[DensityMatrix, float]:
    """Crop to the first dim levels and renormalize; returns the discarded weight."""
    dim = check_dim(dim)
    if dim >= rho.dim:
        return embed(rho, dim), 0.0
    block = rho.matrix[:dim, :dim]
    kept = float(np.trace(block).real)
    return DensityMatrix.from_unnormalized(block), 1.0 - kept


def mean_photon_number(rho: DensityMatrix) -> float:
    """n[rho] = Tr(rho a^dag a)."""
    return float(np.dot(np.arange(rho.dim), rho.diagonal))


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.sum(rho.matrix * rho.matrix.T)))


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(_hermitize(matrix))
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(f"Fidelity of dim {rho.dim} and dim {sigma.dim} states")
    root = _psd_sqrt(rho.matrix)
    inner = np.linalg.eigvalsh(_hermitize(root @ sigma.matrix @ root))
    return float(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2)
