"""
Homodyne Detection

Quadrature marginals of a state, seeded Monte Carlo homodyne sampling,
continuous-trace simulation and temporal-mode extraction.

Rotated quadrature x_theta = (a e^{-i theta} + a^dag e^{i theta})/sqrt(2);
its eigenstates have Fock amplitudes <n|x, theta> = psi_n(x) e^{i n theta}.

Traces live on a uniform grid in nanoseconds. A temporal mode satisfies
sum psi(t)^2 dt = 1 and a quadrature is the weighted integral
x = sum psi(t) trace(t) dt.

Required packages: numpy, scipy
"""

from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from config import get_logger
from errors import (AmbiguousModeError, EmptyInputError, GridMismatchError,
                    InvalidParameterError)
from fock_core import DensityMatrix, check_dim

SAMPLING_X_MIN = -6.0
SAMPLING_X_MAX = 6.0
SAMPLING_POINTS = 4001
MIN_TRACES = 100
RECOMMENDED_TRACES = 1000
# leading excess eigenvalue must exceed this multiple of the noise edge
NOISE_EDGE_MARGIN = 1.5


@dataclass(frozen=True)
class QuadratureSample:
    """One homodyne record: LO phase (radians, in [0, 2 pi)) and quadrature value."""
    theta: float
    x: float

    def __post_init__(self):
        if not (np.isfinite(self.theta) and np.isfinite(self.x)):
            raise InvalidParameterError("Quadrature samples must be finite")
        object.__setattr__(self, "theta", float(np.mod(self.theta, 2.0 * np.pi)))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Column storage for many quadrature samples."""
    theta: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        theta = np.mod(np.asarray(self.theta, dtype=float).ravel(), 2.0 * np.pi)
        x = np.asarray(self.x, dtype=float).ravel()
        if theta.shape != x.shape:
            raise InvalidParameterError(f"{theta.size} phases for {x.size} quadrature values")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(x))):
            raise InvalidParameterError("Quadrature samples must be finite")
        theta.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "x", x)

    def __len__(self) -> int:
        return self.x.size

    def __iter__(self) -> Iterator[QuadratureSample]:
        for theta, x in zip(self.theta, self.x):
            yield QuadratureSample(float(theta), float(x))

    @classmethod
    def from_records(cls, records: Sequence[QuadratureSample]) -> "SampleSet":
        return cls(np.array([r.theta for r in records]), np.array([r.x for r in records]))

    @classmethod
    def concatenate(cls, parts: Sequence["SampleSet"]) -> "SampleSet":
        if not parts:
            raise EmptyInputError("No sample sets to concatenate")
        return cls(np.concatenate([p.theta for p in parts]), np.concatenate([p.x for p in parts]))

    def distinct_phases(self, decimals: int = 9) -> np.ndarray:
        return np.unique(np.round(self.theta, decimals))


# ---------------------------------------------------------------------------
# Marginals and sampling
# ---------------------------------------------------------------------------

def fock_wavefunctions(x: np.ndarray, dim: int) -> np.ndarray:
    """
    Harmonic-oscillator eigenfunctions psi_n(x) for n < dim.

    Uses the three-term recurrence
    psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1},
    which stays finite where explicit Hermite polynomials overflow.

    Returns:
        np.ndarray: real array of shape (dim, len(x))
    """
    dim = check_dim(dim)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    psi = np.empty((dim, x.size))
    psi[0] = np.pi ** -0.25 * np.exp(-0.5 * x ** 2)
    psi[1] = np.sqrt(2.0) * x * psi[0]
    for n in range(1, dim - 1):
        psi[n + 1] = np.sqrt(2.0 / (n + 1)) * x * psi[n] - np.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def quadrature_vectors(x: np.ndarray, theta: np.ndarray, dim: int) -> np.ndarray:
    """Columns <n|x_j, theta_j> = psi_n(x_j) e^{i n theta_j}, shape (dim, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.broadcast_to(np.asarray(theta, dtype=float), x.shape)
    phases = np.exp(1j * np.arange(dim)[:, None] * theta[None, :])
    return fock_wavefunctions(x, dim) * phases


def marginal_pdf(rho: DensityMatrix, theta: float, x) -> np.ndarray:
    """
    Homodyne outcome density p(x | theta) = <x, theta| rho |x, theta>.

    Accepts a scalar or an array of x; returns a float for scalar input.
    """
    u = quadrature_vectors(x, theta, rho.dim)
    density = np.real(np.einsum("mj,mn,nj->j", u.conj(), rho.matrix, u))
    return float(density[0]) if np.ndim(x) == 0 else density


def marginal_cdf_grid(rho: DensityMatrix, theta: float,
                      x_min: float = SAMPLING_X_MIN, x_max: float = SAMPLING_X_MAX,
                      points: int = SAMPLING_POINTS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cumulative distribution of p(x | theta) on a fine uniform grid.

    The density is clipped at zero and the trapezoid CDF is scaled to end at 1.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (x grid, cdf values)
    """
    grid = np.linspace(x_min, x_max, points)
    pdf = np.clip(marginal_pdf(rho, theta, grid), 0.0, None)
    cdf = cumulative_trapezoid(pdf, grid, initial=0.0)
    if cdf[-1] <= 0:
        raise InvalidParameterError(f"Marginal at theta={theta:.4f} has no weight on [{x_min}, {x_max}]")
    return grid, cdf / cdf[-1]


def inverse_cdf(uniform: np.ndarray, grid: np.ndarray, cdf: np.ndarray) -> np.ndarray:
    """Map uniform variates through a tabulated CDF with linear interpolation per segment."""
    idx = np.searchsorted(cdf, uniform, side="right") - 1
    idx = np.clip(idx, 0, grid.size - 2)
    lo, hi = cdf[idx], cdf[idx + 1]
    width = hi - lo
    frac = np.divide(uniform - lo, width, out=np.zeros_like(uniform), where=width > 0)
    return grid[idx] + np.clip(frac, 0.0, 1.0) * (grid[idx + 1] - grid[idx])


def phase_rng(seed: int, phase_index: int) -> np.random.Generator:
    """Independent stream for one measurement phase."""
    return np.random.default_rng(np.random.SeedSequence([seed, phase_index]))


def sample_quadratures(rho: DensityMatrix, phases: Sequence[float], n_per_phase: int,
                       seed: int) -> SampleSet:
    """
    Draw n_per_phase homodyne outcomes at each phase by inverse-CDF sampling.

    Each phase uses its own stream derived from (seed, phase index), so the
    result does not depend on evaluation order.

    Raises:
        EmptyInputError: if phases is empty.
    """
    phases = list(phases)
    if not phases:
        raise EmptyInputError("At least one measurement phase is required")
    if n_per_phase < 1:
        raise InvalidParameterError(f"n_per_phase must be >= 1, got {n_per_phase}")

    thetas, xs = [], []
    for index, theta in enumerate(phases):
        grid, cdf = marginal_cdf_grid(rho, theta)
        uniform = phase_rng(seed, index).random(n_per_phase)
        xs.append(inverse_cdf(uniform, grid, cdf))
        thetas.append(np.full(n_per_phase, theta, dtype=float))
    get_logger().debug(f"Sampled {n_per_phase} x {len(phases)} quadratures (seed={seed})")
    return SampleSet(np.concatenate(thetas), np.concatenate(xs))


# ---------------------------------------------------------------------------
# Temporal modes and traces
# ---------------------------------------------------------------------------

def _uniform_step(times: np.ndarray) -> float:
    if times.ndim != 1 or times.size < 2:
        raise InvalidParameterError("A time grid needs at least two points")
    steps = np.diff(times)
    step = float(steps.mean())
    if step <= 0 or np.max(np.abs(steps - step)) > 1e-9 * max(1.0, abs(step)):
        raise InvalidParameterError("Time grid must be uniform and increasing")
    return step


def time_grid(step_ns: float, window_ns: float) -> np.ndarray:
    """Uniform grid [0, window) with the given step."""
    if step_ns <= 0 or window_ns <= step_ns:
        raise InvalidParameterError(f"Bad trace grid: step={step_ns}, window={window_ns}")
    return np.arange(int(round(window_ns / step_ns))) * step_ns


@dataclass(frozen=True, eq=False)
class TemporalMode:
    """Real wave-packet envelope on a uniform grid with sum psi^2 dt = 1."""
    times: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if times.shape != weights.shape:
            raise GridMismatchError(f"{times.size} times for {weights.size} weights")
        step = _uniform_step(times)
        norm = np.sum(weights ** 2) * step
        if abs(norm - 1.0) > 1e-9:
            raise InvalidParameterError(f"Temporal mode is not normalized (sum psi^2 dt = {norm:.6g})")
        times.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "weights", weights)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @classmethod
    def normalized(cls, times: np.ndarray, weights: np.ndarray) -> "TemporalMode":
        times = np.asarray(times, dtype=float)
        weights = np.asarray(weights, dtype=float)
        norm = np.sqrt(np.sum(weights ** 2) * _uniform_step(times))
        if norm == 0:
            raise InvalidParameterError("Envelope vanishes on the grid")
        return cls(times, weights / norm)


@dataclass(frozen=True, eq=False)
class RawTrace:
    """One continuous homodyne signal x(t)."""
    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class TraceSet:
    """Many traces on one grid; values has shape (n_traces, n_bins)."""
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[1] != times.size:
            raise GridMismatchError(f"Traces have {values.shape[1]} bins, grid has {times.size}")
        _uniform_step(times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __iter__(self) -> Iterator[RawTrace]:
        for row in self.values:
            yield RawTrace(self.times, row)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def _check_grid(times: np.ndarray, envelope: TemporalMode) -> None:
    if times.shape != envelope.times.shape or not np.allclose(times, envelope.times, rtol=0, atol=1e-9):
        raise GridMismatchError("Trace and temporal mode are sampled on different grids")


def exponential_envelope(times: np.ndarray, t_release: float, tau: float) -> TemporalMode:
    """One-sided exponential psi(t) ~ exp(-(t - t_release)/(2 tau)) for t >= t_release."""
    if tau <= 0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    times = np.asarray(times, dtype=float)
    weights = np.where(times >= t_release, np.exp(-(times - t_release) / (2.0 * tau)), 0.0)
    return TemporalMode.normalized(times, weights)


def gaussian_envelope(times: np.ndarray, center: float, width: float) -> TemporalMode:
    """Gaussian psi(t) whose intensity psi^2 has standard deviation width."""
    if width <= 0:
        raise InvalidParameterError(f"width must be positive, got {width}")
    times = np.asarray(times, dtype=float)
    return TemporalMode.normalized(times, np.exp(-((times - center) ** 2) / (4.0 * width ** 2)))


def shift_envelope(mode: TemporalMode, shift: float) -> TemporalMode:
    """Delay a mode by shift (same units as the grid); weight pushed off the grid is dropped."""
    shifted = np.interp(mode.times - shift, mode.times, mode.weights, left=0.0, right=0.0)
    return TemporalMode.normalized(mode.times, shifted)


def mode_overlap(a: TemporalMode, b: TemporalMode) -> float:
    """|sum a(t) b(t) dt|."""
    _check_grid(a.times, b)
    return float(abs(np.sum(a.weights * b.weights) * a.dt))


def simulate_traces(x_values: Sequence[float], envelope: TemporalMode, noise_seed: int) -> TraceSet:
    """
    Continuous traces carrying one quadrature each in the mode psi.

    trace_k(t) = x_k psi(t) + v_k(t), where v is white noise of variance
    1/(2 dt) per bin with its psi component removed. Projecting onto psi
    returns x_k exactly; every normalized mode orthogonal to psi sees
    vacuum noise of variance 1/2. Pass vacuum-distributed x_k for an empty
    mode.
    """
    x = np.asarray(x_values, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInputError("No quadrature values to embed")
    rng = np.random.default_rng(noise_seed)
    dt = envelope.dt
    psi = envelope.weights
    noise = rng.normal(0.0, np.sqrt(0.5 / dt), size=(x.size, psi.size))
    noise -= np.outer(noise @ psi * dt, psi)
    return TraceSet(envelope.times, x[:, None] * psi[None, :] + noise)


def project_quadrature(trace: RawTrace, envelope: TemporalMode) -> float:
    """Weighted integration sum psi(t_i) trace(t_i) dt."""
    times = np.asarray(trace.times, dtype=float)
    _check_grid(times, envelope)
    return float(np.dot(envelope.weights, trace.values) * envelope.dt)


def traces_to_quadratures(traces: TraceSet, envelope: TemporalMode) -> np.ndarray:
    _check_grid(traces.times, envelope)
    return traces.values @ envelope.weights * envelope.dt


def extract_temporal_mode(traces: TraceSet, degeneracy_tol: float = 1e-3) -> TemporalMode:
    """
    Dominant principal component of the excess trace covariance.

    The vacuum baseline 1/(2 dt) is subtracted from the sample covariance
    diagonal. The leading eigenvector is accepted only when its eigenvalue
    clears NOISE_EDGE_MARGIN times the sampling-noise edge sigma^2((1 + sqrt(T/K))^2 - 1) and
    is separated from the runner-up; its sign makes the peak weight positive.

    Raises:
        AmbiguousModeError: no excess variance or a degenerate top pair.
    """
    logger = get_logger()
    n_traces, n_bins = traces.values.shape
    if n_traces < MIN_TRACES:
        raise InvalidParameterError(f"Need at least {MIN_TRACES} traces, got {n_traces}")
    if n_traces < RECOMMENDED_TRACES:
        logger.warning(f"Only {n_traces} traces; mode estimate will be noisy (recommend >= {RECOMMENDED_TRACES})")

    dt = traces.dt
    baseline = 0.5 / dt
    covariance = np.cov(traces.values, rowvar=False)
    excess = covariance - baseline * np.eye(n_bins)
    eigvals, eigvecs = np.linalg.eigh(excess)
    top, runner_up = eigvals[-1], eigvals[-2]

    noise_edge = baseline * ((1.0 + np.sqrt(n_bins / n_traces)) ** 2 - 1.0)
    if top <= NOISE_EDGE_MARGIN * noise_edge:
        raise AmbiguousModeError(
            f"No excess variance above the noise edge (top eigenvalue {top * dt:.4g}, "
            f"edge {noise_edge * dt:.4g} in units of 1/dt)")
    if abs(top - runner_up) <= degeneracy_tol * abs(top):
        raise AmbiguousModeError("Largest two excess eigenvalues are degenerate")

    vector = eigvecs[:, -1]
    if vector[np.argmax(np.abs(vector))] < 0:
        vector = -vector
    logger.debug(f"Extracted temporal mode from {n_traces} traces: excess eigenvalue {top * dt:.4f}/dt")
    return TemporalMode.normalized(traces.times, vector)


def mode_shift(reference: TemporalMode, shifted: TemporalMode) -> float:
    """Delay of one mode relative to another from the cross-correlation peak."""
    _check_grid(reference.times, shifted)
    corr = np.correlate(shifted.weights, reference.weights, mode="full")
    lag = int(np.argmax(corr)) - (reference.weights.size - 1)
    return lag * reference.dt
