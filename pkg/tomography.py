"""
Homodyne Tomography by Iterative Maximum Likelihood

Reconstructs a density matrix from phase-tagged quadrature samples with the
RrhoR fixed-point iteration:

    rho <- N[R rho R],  R = (1/N) sum_j (f_j / p_j) |x_j, theta_j><x_j, theta_j|

where p_j = <x_j, theta_j| rho |x_j, theta_j>. A full step that would lower
the likelihood is replaced by a diluted step (I + eps R) rho (I + eps R).

Required packages: numpy
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from config import AnalysisConfig, get_logger
from errors import EmptyInputError, InvalidParameterError, TooFewPhasesError
from fock_core import DensityMatrix, check_dim
from homodyne import SampleSet, quadrature_vectors

MIN_PHASES = 3
MIN_PHASE_SPAN = np.pi / 2
MONOTONE_TOL = 1e-10
MIN_DILUTION = 1e-6


class Binning(str, Enum):
    PER_SAMPLE = "per_sample"
    BINNED = "binned"


@dataclass(frozen=True)
class MleOptions:
    """Reconstruction settings."""
    dim: int = 10
    max_iters: int = 2000
    tol: float = 1e-9
    binning: Binning = Binning.PER_SAMPLE
    n_bins: int = 200
    x_range: Tuple[float, float] = (-6.0, 6.0)

    def __post_init__(self):
        check_dim(self.dim)
        if self.tol <= 0:
            raise InvalidParameterError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise InvalidParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.x_range[0] >= self.x_range[1]:
            raise InvalidParameterError(f"Empty x range {self.x_range}")
        object.__setattr__(self, "binning", Binning(self.binning))

    @classmethod
    def from_config(cls, section: AnalysisConfig, dim: Optional[int] = None) -> "MleOptions":
        return cls(
            dim=dim if dim is not None else section.reconstruction_dim,
            max_iters=section.max_iters,
            tol=section.tol,
            binning=Binning(section.binning),
            n_bins=section.n_bins,
            x_range=(section.x_min, section.x_max),
        )


@dataclass
class MleResult:
    """Reconstructed state with convergence diagnostics."""
    state: DensityMatrix
    iterations: int
    log_likelihood: float
    history: List[float] = field(default_factory=list)
    converged: bool = False

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "history": list(self.history),
        }


@dataclass(frozen=True)
class PhaseStats:
    theta: float
    count: int
    mean: float
    variance: float


def phase_summary(samples: SampleSet) -> List[PhaseStats]:
    """Per-phase sample count, mean and variance."""
    stats = []
    for theta in samples.distinct_phases():
        mask = np.isclose(samples.theta, theta, rtol=0, atol=1e-9)
        x = samples.x[mask]
        stats.append(PhaseStats(float(theta), int(x.size), float(x.mean()),
                                float(x.var(ddof=1)) if x.size > 1 else 0.0))
    return stats


def check_phase_coverage(samples: SampleSet) -> None:
    """
    Require at least three distinct phases whose circular span exceeds pi/2.

    Raises:
        TooFewPhasesError: off-diagonal phases are not identifiable.
    """
    phases = np.sort(samples.distinct_phases())
    if phases.size < MIN_PHASES:
        raise TooFewPhasesError(f"Need at least {MIN_PHASES} distinct phases, got {phases.size}")
    gaps = np.diff(np.concatenate([phases, [phases[0] + 2.0 * np.pi]]))
    span = 2.0 * np.pi - gaps.max()
    if span <= MIN_PHASE_SPAN:
        raise TooFewPhasesError(f"Phases span {np.degrees(span):.1f} deg, need more than 90 deg")


def measurement_rows(samples: SampleSet, options: MleOptions) -> Tuple[np.ndarray, np.ndarray]:
    """
    Projector amplitudes and their frequencies.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (rows (n, dim) with <x,theta|n>, weights f_j)
    """
    if options.binning is Binning.PER_SAMPLE:
        vectors = quadrature_vectors(samples.x, samples.theta, options.dim)
        return vectors.conj().T, np.ones(len(samples))

    edges = np.linspace(options.x_range[0], options.x_range[1], options.n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    rows, weights = [], []
    for theta in samples.distinct_phases():
        mask = np.isclose(samples.theta, theta, rtol=0, atol=1e-9)
        counts, _ = np.histogram(samples.x[mask], bins=edges)
        keep = counts > 0
        vectors = quadrature_vectors(centers[keep], np.full(keep.sum(), theta), options.dim)
        rows.append(vectors.conj().T)
        weights.append(counts[keep].astype(float))
    binned = int(sum(w.sum() for w in weights))
    if binned < len(samples):
        get_logger().warning(
            f"{len(samples) - binned} of {len(samples)} samples fall outside x_range "
            f"[{options.x_range[0]:g}, {options.x_range[1]:g}] and were dropped")
    return np.vstack(rows), np.concatenate(weights)


def _probabilities(rows: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.real(np.sum((rows @ rho) * rows.conj(), axis=1))


def _log_likelihood(rows: np.ndarray, weights: np.ndarray, rho: np.ndarray) -> float:
    probs = _probabilities(rows, rho)
    if np.any(probs <= 0):
        return float("-inf")
    return float(np.dot(weights, np.log(probs)))


def log_likelihood(rho: DensityMatrix, samples: SampleSet,
                   weights: Optional[np.ndarray] = None) -> float:
    """
    sum_j f_j ln p_j with unit weights by default.

    Returns -inf when some sample has zero probability under rho.
    """
    if len(samples) == 0:
        raise EmptyInputError("No samples")
    rows = quadrature_vectors(samples.x, samples.theta, rho.dim).conj().T
    f = np.ones(len(samples)) if weights is None else np.asarray(weights, dtype=float)
    return _log_likelihood(rows, f, rho.matrix)


def _normalize(matrix: np.ndarray) -> np.ndarray:
    matrix = 0.5 * (matrix + matrix.conj().T)
    return matrix / np.trace(matrix).real


def mle_reconstruct(samples: SampleSet, options: Optional[MleOptions] = None) -> MleResult:
    """
    Maximum-likelihood density matrix from homodyne samples.

    Starts from I/dim and stops when the relative log-likelihood change
    falls below options.tol. Without convergence after max_iters the last
    (best) iterate is returned with converged=False.

    Raises:
        EmptyInputError: no samples.
        TooFewPhasesError: fewer than three phases or a span of at most pi/2.
    """
    logger = get_logger()
    options = options or MleOptions()
    if len(samples) == 0:
        raise EmptyInputError("No samples to reconstruct from")
    check_phase_coverage(samples)
    dim = options.dim
    if len(samples) < dim ** 2:
        raise InvalidParameterError(f"{len(samples)} samples cannot fix a {dim}x{dim} density matrix")
    if len(samples) < 50 * dim ** 2:
        logger.warning(f"Only {len(samples)} samples for dim={dim}; estimate will be noisy")

    rows, weights = measurement_rows(samples, options)
    total = weights.sum()
    identity = np.eye(dim)
    rho = identity / dim
    current = _log_likelihood(rows, weights, rho)
    history = [current]
    converged = False
    iterations = 0

    for iterations in range(1, options.max_iters + 1):
        probs = _probabilities(rows, rho)
        scaled = weights / np.clip(probs, 1e-300, None)
        r_op = (rows.conj().T * scaled) @ rows / total

        candidate = _normalize(r_op @ rho @ r_op)
        value = _log_likelihood(rows, weights, candidate)
        floor = current - MONOTONE_TOL * max(1.0, abs(current))
        eps = 1.0
        while value < floor and eps >= MIN_DILUTION:
            step = identity + eps * r_op
            candidate = _normalize(step @ rho @ step)
            value = _log_likelihood(rows, weights, candidate)
            eps *= 0.5
        if value < floor:
            logger.debug(f"No likelihood-increasing step at iteration {iterations}; stopping")
            converged = True
            break

        change = abs(value - current) / max(1.0, abs(current))
        rho, current = candidate, value
        history.append(current)
        if change < options.tol:
            converged = True
            break

    if not converged:
        logger.warning(f"MLE did not converge in {options.max_iters} iterations")
    logger.info(f"MLE finished: {iterations} iterations, log-likelihood {current:.6f}")
    return MleResult(
        state=DensityMatrix.from_unnormalized(rho),
        iterations=iterations,
        log_likelihood=current,
        history=history,
        converged=converged,
    )
