"""
Phase-Space Analysis

Wigner-function evaluation and negativity search, the quantum
non-Gaussianity witness

    Delta[rho] = W[rho](0, 0) - (1/pi) exp(-2 n (n + 1)),  n = Tr(rho a^dag a),

which is non-negative for every mixture of Gaussian states, its
Gaussian-corrected scan over displacements, and the loss/dephasing
decomposition of reconstructed states.

Wigner values use the displaced parity
    W(a) = (1/pi) sum_mn rho_mn (-1)^m <n|D(2a)|m>,  a = (x + i p)/sqrt(2).

Required packages: numpy, scipy
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, curve_fit, minimize_scalar

from config import get_config, get_logger
from errors import (EmptyInputError, InvalidParameterError,
                    UndefinedLossError, UnreliableSubspaceError)
from fock_core import (DensityMatrix, PhaseSpacePoint, apply_unitary,
                       displacement_blocks, displacement_operator, embed,
                       mean_photon_number, squeezing_operator)
from memory_channel import MemoryParams, store

ZETA_BOUND = 1.5
ZETA_TOL = 1e-5
TIE_TOL = 1e-12


# ---------------------------------------------------------------------------
# Wigner function
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WignerGrid:
    """W(x, p) on a uniform grid; values[i, j] is at (x[j], p[i])."""
    x: np.ndarray
    p: np.ndarray
    step: float
    values: np.ndarray

    @property
    def x_range(self) -> Tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    @property
    def p_range(self) -> Tuple[float, float]:
        return float(self.p[0]), float(self.p[-1])

    @property
    def integral(self) -> float:
        """Riemann sum of W step^2, the normalization check value."""
        return float(self.values.sum() * self.step ** 2)


@dataclass(frozen=True)
class WignerMinimum:
    point: PhaseSpacePoint
    value: float
    on_boundary: bool = False


def wigner_origin(rho: DensityMatrix) -> float:
    """W(0, 0) = (1/pi) sum_n (-1)^n rho_nn."""
    parity = (-1.0) ** np.arange(rho.dim)
    return float(np.dot(parity, rho.diagonal)) / np.pi


def wigner_values(rho: DensityMatrix, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """
    Wigner function at arbitrary points (vectorized over broadcast x, p).

    Points are evaluated in order of distance from the origin so each
    displacement chunk gets a tight working space.

    Raises:
        TruncationRiskError: point too far out for the working-space limit.
    """
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    shape = x.shape
    amplitudes = np.sqrt(2.0) * (x.ravel() + 1j * p.ravel())  # 2a
    order = np.argsort(np.abs(amplitudes), kind="stable")
    signed = rho.matrix * ((-1.0) ** np.arange(rho.dim))[:, None]
    blocks = displacement_blocks(amplitudes[order], rho.dim)
    values = np.empty(amplitudes.size)
    values[order] = np.real(np.einsum("mn,knm->k", signed, blocks)) / np.pi
    return values.reshape(shape)


def wigner_at(rho: DensityMatrix, point: PhaseSpacePoint) -> float:
    """Displaced-parity Wigner value at one phase-space point."""
    if point.x == 0.0 and point.p == 0.0:
        return wigner_origin(rho)
    return float(wigner_values(rho, np.array([point.x]), np.array([point.p]))[0])


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0 or hi < lo:
        raise InvalidParameterError(f"Bad grid axis [{lo}, {hi}] step {step}")
    count = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(count)


def wigner_grid(rho: DensityMatrix, x_range: Tuple[float, float], p_range: Tuple[float, float],
                step: float) -> WignerGrid:
    """Evaluate W on the inclusive rectangle x_range x p_range."""
    xs = _axis(x_range[0], x_range[1], step)
    ps = _axis(p_range[0], p_range[1], step)
    xx, pp = np.meshgrid(xs, ps)
    grid = WignerGrid(xs, ps, float(step), wigner_values(rho, xx, pp))
    get_logger().debug(f"Wigner grid {xs.size}x{ps.size}, integral {grid.integral:.6f}")
    return grid


def _tie_break(xx: np.ndarray, pp: np.ndarray, values: np.ndarray) -> Tuple[int, int]:
    """Argmin with ties broken by smallest radius, then smallest angle in [0, 2 pi)."""
    vmin = np.nanmin(values)
    rows, cols = np.nonzero(values <= vmin + TIE_TOL)
    radius = np.hypot(xx[rows, cols], pp[rows, cols])
    angle = np.mod(np.arctan2(pp[rows, cols], xx[rows, cols]), 2.0 * np.pi)
    best = np.lexsort((angle, np.round(radius, 12)))[0]
    return int(rows[best]), int(cols[best])


def _quadratic_refine(values: np.ndarray, row: int, col: int, step: float) -> Optional[Tuple[float, float, float]]:
    """Stationary point of a quadratic fitted to the 3x3 neighborhood, if it is a minimum inside the cell."""
    patch = values[row - 1:row + 2, col - 1:col + 2]
    if patch.shape != (3, 3) or not np.all(np.isfinite(patch)):
        return None
    offsets = np.array([-step, 0.0, step])
    dp, dx = np.meshgrid(offsets, offsets, indexing="ij")
    dx, dp = dx.ravel(), dp.ravel()
    design = np.column_stack([np.ones(9), dx, dp, dx ** 2, dp ** 2, dx * dp])
    c = np.linalg.lstsq(design, patch.ravel(), rcond=None)[0]
    hessian = np.array([[2.0 * c[3], c[5]], [c[5], 2.0 * c[4]]])
    if np.any(np.linalg.eigvalsh(hessian) <= 0):
        return None
    shift = np.linalg.solve(hessian, -c[1:3])
    if np.any(np.abs(shift) > step):
        return None
    sx, sp = shift
    value = c[0] + c[1] * sx + c[2] * sp + c[3] * sx ** 2 + c[4] * sp ** 2 + c[5] * sx * sp
    return float(sx), float(sp), float(value)


def find_wigner_minimum(grid: WignerGrid) -> WignerMinimum:
    """
    Grid argmin refined by a local quadratic fit.

    A minimum on the grid edge is returned unrefined with on_boundary set
    and a warning logged: the range is too small to contain it.
    """
    if grid.values.size == 0:
        raise EmptyInputError("Empty Wigner grid")
    xx, pp = np.meshgrid(grid.x, grid.p)
    row, col = _tie_break(xx, pp, grid.values)
    on_boundary = row in (0, grid.p.size - 1) or col in (0, grid.x.size - 1)
    x, p, value = float(grid.x[col]), float(grid.p[row]), float(grid.values[row, col])
    if on_boundary:
        get_logger().warning(f"Wigner minimum at grid boundary ({x:.3f}, {p:.3f}); enlarge the range")
    else:
        refined = _quadratic_refine(grid.values, row, col, grid.step)
        if refined is not None:
            x, p, value = x + refined[0], p + refined[1], refined[2]
    return WignerMinimum(PhaseSpacePoint(x, p), value, on_boundary)


def wigner_minimum(rho: DensityMatrix, half_width: float = 3.0, step: float = 0.05) -> WignerMinimum:
    """Minimum over the square [-half_width, half_width]^2."""
    return find_wigner_minimum(wigner_grid(rho, (-half_width, half_width), (-half_width, half_width), step))


def dip_direction(rho: DensityMatrix, radius: float = 1.5, step: float = 0.05) -> Tuple[float, bool]:
    """
    Direction of the Wigner dip: angle of the argmin of W over a disk.

    Restricting to a disk gives a direction even when W is positive
    everywhere. Phase-blind (Fock-diagonal) states and minima at the origin
    have no direction; those return (0.0, False).
    """
    off_diagonal = rho.matrix - np.diag(rho.matrix.diagonal())
    if np.max(np.abs(off_diagonal)) <= 1e-12:
        return 0.0, False
    axis = _axis(-radius, radius, step)
    xx, pp = np.meshgrid(axis, axis)
    values = wigner_values(rho, xx, pp)
    values[np.hypot(xx, pp) > radius + 1e-12] = np.nan
    row, col = _tie_break(xx, pp, values)
    x, p = xx[row, col], pp[row, col]
    refined = _quadratic_refine(values, row, col, step)
    if refined is not None:
        x, p = x + refined[0], p + refined[1]
    if np.hypot(x, p) < 0.5 * step:
        return 0.0, False
    return float(np.arctan2(p, x)), True


# ---------------------------------------------------------------------------
# Non-Gaussianity witness
# ---------------------------------------------------------------------------

def gaussian_bound(mean_photons: float) -> float:
    """Largest W(0, 0) any Gaussian mixture with this mean photon number can reach."""
    return float(np.exp(-2.0 * mean_photons * (mean_photons + 1.0))) / np.pi


def nongaussianity_delta(rho: DensityMatrix) -> float:
    """Delta = W(0, 0) - (1/pi) exp(-2 n (n + 1)); negative values witness non-Gaussianity."""
    return wigner_origin(rho) - gaussian_bound(mean_photon_number(rho))


def optimal_squeezed_photon_number(rho: DensityMatrix) -> float:
    """
    Smallest mean photon number reachable by squeezing alone (any axis).

    With N = <a^dag a> and M = <a^2>: sqrt((N + 1/2)^2 - |M|^2) - 1/2.
    """
    a = np.diag(np.sqrt(np.arange(1, rho.dim, dtype=float)), k=1)
    n_mean = mean_photon_number(rho)
    m = np.trace(rho.matrix @ a @ a)
    return float(np.sqrt(max((n_mean + 0.5) ** 2 - abs(m) ** 2, 0.25)) - 0.5)


@dataclass(frozen=True)
class WitnessPoint:
    gamma: float
    zeta_opt: float
    phi: float
    delta: float


@dataclass
class WitnessCurve:
    """Gaussian-corrected witness values along the dip direction."""
    points: List[WitnessPoint] = field(default_factory=list)
    phi: float = 0.0
    dip_defined: bool = True

    @property
    def gammas(self) -> np.ndarray:
        return np.array([pt.gamma for pt in self.points])

    @property
    def deltas(self) -> np.ndarray:
        return np.array([pt.delta for pt in self.points])

    @property
    def min_delta(self) -> float:
        return float(self.deltas.min())

    @property
    def argmin_gamma(self) -> float:
        return float(self.gammas[int(np.argmin(self.deltas))])

    @property
    def enters_negative(self) -> bool:
        return bool(np.any(self.deltas < 0))


def _optimize_squeezing(rho: DensityMatrix, phi: float) -> Tuple[float, DensityMatrix]:
    number = np.arange(rho.dim, dtype=float)

    def squeezed(zeta: float) -> DensityMatrix:
        return apply_unitary(rho, squeezing_operator(zeta * np.exp(2j * phi), rho.dim))

    def photons(zeta: float) -> float:
        s = squeezing_operator(zeta * np.exp(2j * phi), rho.dim).matrix
        populations = np.real(np.einsum("ij,jk,ik->i", s, rho.matrix, s.conj()))
        return float(np.dot(number, populations))

    result = minimize_scalar(photons, bounds=(-ZETA_BOUND, ZETA_BOUND), method="bounded",
                             options={"xatol": ZETA_TOL})
    zeta = float(result.x)
    # Bounded search never evaluates zeta = 0 exactly.
    if photons(0.0) <= result.fun:
        zeta = 0.0
    return zeta, squeezed(zeta)


def corrected_delta_curve(rho: DensityMatrix, gammas: Sequence[float],
                          dim: Optional[int] = None) -> WitnessCurve:
    """
    Witness after Gaussian correction, scanned over displacement gamma.

    phi is the dip direction. For each gamma the state is displaced by
    D(-gamma e^{i phi}), which carries the dip toward the origin, then
    squeezed by S(zeta e^{2 i phi}) with zeta in [-1.5, 1.5] chosen to
    minimize the mean photon number. Work happens in a zero-padded space
    of witness_dim levels.
    """
    logger = get_logger()
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise EmptyInputError("No displacements to scan")
    if any(g < 0 for g in gammas):
        raise InvalidParameterError("gamma values must be non-negative")
    work_dim = max(dim if dim is not None else get_config().witness_dim, rho.dim)
    padded = embed(rho, work_dim)

    phi, defined = dip_direction(rho)
    if not defined:
        logger.warning("Dip direction undefined (phase-symmetric state); using phi = 0")

    curve = WitnessCurve(phi=phi, dip_defined=defined)
    for gamma in gammas:
        displaced = apply_unitary(padded, displacement_operator(-gamma * np.exp(1j * phi), work_dim))
        zeta, corrected = _optimize_squeezing(displaced, phi)
        curve.points.append(WitnessPoint(gamma, zeta, phi, nongaussianity_delta(corrected)))
    logger.info(f"Witness scan: min Delta {curve.min_delta:.5f} at gamma {curve.argmin_gamma:.3f}")
    return curve


def gamma_scan(gamma_max: float = 1.5, gamma_step: float = 0.05) -> np.ndarray:
    return _axis(0.0, gamma_max, gamma_step)


# ---------------------------------------------------------------------------
# Loss / dephasing decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecompositionResult:
    """
    Loss and phase-noise estimate from the 0/1 block.

    Flags: loss_clamped when 1 - rho_11/beta^2 fell outside [0, 1];
    over_coherent when the coherence ratio exceeded 1 (sigma set to 0);
    sigma is inf when no coherence is left.
    """
    loss: float
    sigma: float
    renorm_weight: float
    loss_clamped: bool = False
    over_coherent: bool = False

    @property
    def sigma_infinite(self) -> bool:
        return bool(np.isinf(self.sigma))


def qubit_subspace(rho: DensityMatrix) -> Tuple[DensityMatrix, float]:
    """
    Renormalized vacuum/single-photon block and the discarded weight.

    Raises:
        UnreliableSubspaceError: if rho_00 + rho_11 < 0.5.
    """
    kept = float(rho[0, 0].real + rho[1, 1].real)
    if kept < 0.5:
        raise UnreliableSubspaceError(f"Only {kept:.3f} of the weight lies in the 0/1 block")
    return DensityMatrix.from_unnormalized(rho.matrix[:2, :2]), 1.0 - kept


def estimate_loss_dephasing(rho: DensityMatrix, alpha: float, beta: float) -> DecompositionResult:
    """
    Invert the loss and dephasing maps on the 0/1 block:
    1 - L = rho_11 / beta^2 and exp(-sigma^2/2) = |rho_01| / (alpha beta sqrt(1 - L)).
    """
    logger = get_logger()
    if beta <= 0:
        raise UndefinedLossError("beta = 0 leaves no single-photon reference")
    if alpha <= 0:
        raise InvalidParameterError("alpha must be positive to reference the coherence")
    if abs(alpha ** 2 + beta ** 2 - 1.0) > 1e-9:
        raise InvalidParameterError(f"alpha^2 + beta^2 = {alpha ** 2 + beta ** 2!r}, expected 1")

    block, discarded = qubit_subspace(rho)
    raw_loss = 1.0 - block[1, 1].real / beta ** 2
    loss = float(np.clip(raw_loss, 0.0, 1.0))
    clamped = loss != raw_loss
    if clamped:
        logger.warning(f"Inferred loss {raw_loss:.4f} clamped to {loss:.4f}")

    coherence = abs(block[0, 1])
    over_coherent = False
    if coherence == 0.0 or loss >= 1.0:
        sigma = float("inf")
    else:
        ratio = coherence / (alpha * beta * np.sqrt(1.0 - loss))
        if ratio > 1.0 + 1e-12:
            logger.warning(f"Coherence ratio {ratio:.4f} exceeds 1; sigma set to 0")
            sigma, over_coherent = 0.0, True
        else:
            sigma = float(np.sqrt(-2.0 * np.log(min(ratio, 1.0))))
    return DecompositionResult(loss, sigma, 1.0 - discarded, clamped, over_coherent)


# ---------------------------------------------------------------------------
# Fits, calibration and summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HalfLifeFit:
    half_life: float
    amplitude: float
    half_life_std: float


def fit_half_life(times: Sequence[float], fractions: Sequence[float]) -> HalfLifeFit:
    """Fit fraction(t) = A 2^(-t / T) and return T in the units of times."""
    t = np.asarray(times, dtype=float)
    f = np.asarray(fractions, dtype=float)
    if t.size < 2 or t.size != f.size:
        raise InvalidParameterError("Need at least two (time, fraction) pairs of equal length")
    if np.any(f <= 0):
        raise InvalidParameterError("Fractions must be positive")
    slope, intercept = np.polyfit(t, np.log(f), 1)
    guess = (float(np.exp(intercept)), float(-np.log(2.0) / slope) if slope < 0 else float(np.ptp(t) or 1.0))

    def model(time, amplitude, half_life):
        return amplitude * np.exp2(-time / half_life)

    params, cov = curve_fit(model, t, f, p0=guess, maxfev=10000)
    std = float(np.sqrt(cov[1, 1])) if np.all(np.isfinite(cov)) else float("nan")
    return HalfLifeFit(half_life=float(params[1]), amplitude=float(params[0]), half_life_std=std)


def calibrate_initial_loss(state: DensityMatrix, memory: MemoryParams, target_wmin: float,
                           half_width: float = 2.0, step: float = 0.05) -> float:
    """
    Effective zero-time loss L0 whose noiseless channel output has the target Wigner minimum.

    Raises:
        InvalidParameterError: target not reachable for L0 in [0, 0.99].
    """
    def excess(loss: float) -> float:
        params = MemoryParams(memory.half_life, memory.detuning, memory.dephasing_sigma,
                              memory.eta, loss)
        return wigner_minimum(store(state, params, 0.0), half_width, step).value - target_wmin

    lo, hi = 0.0, 0.99
    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo > 0 or f_hi < 0:
        raise InvalidParameterError(
            f"Target W_min {target_wmin} outside reachable range [{f_lo + target_wmin:.4f}, {f_hi + target_wmin:.4f}]")
    loss = float(brentq(excess, lo, hi, xtol=1e-6))
    get_logger().info(f"Calibrated initial loss L0 = {loss:.5f} for W_min = {target_wmin}")
    return loss


@dataclass(frozen=True)
class StateSummary:
    """One summary-table row."""
    storage_time_ns: float
    rho11: float
    abs_rho01: float
    arg_rho01: float
    w_min: float
    w_min_x: float
    w_min_p: float
    delta: float
    loss: float
    sigma: float

    def as_row(self) -> List[float]:
        return [self.storage_time_ns, self.rho11, self.abs_rho01, self.arg_rho01, self.w_min,
                self.w_min_x, self.w_min_p, self.delta, self.loss, self.sigma]

    @staticmethod
    def header() -> List[str]:
        return ["storage_time_ns", "rho11", "abs_rho01", "arg_rho01", "w_min", "w_min_x",
                "w_min_p", "delta", "loss", "sigma"]


def summarize_state(rho: DensityMatrix, alpha: float, beta: float, storage_time_ns: float = 0.0,
                    minimum: Optional[WignerMinimum] = None) -> StateSummary:
    """Table row for one reconstructed state; the Wigner minimum is computed when not supplied."""
    if minimum is None:
        minimum = wigner_minimum(rho)
    decomposition = estimate_loss_dephasing(rho, alpha, beta)
    return StateSummary(
        storage_time_ns=float(storage_time_ns),
        rho11=float(rho[1, 1].real),
        abs_rho01=float(abs(rho[0, 1])),
        arg_rho01=float(np.angle(rho[0, 1])),
        w_min=minimum.value,
        w_min_x=minimum.point.x,
        w_min_p=minimum.point.p,
        delta=nongaussianity_delta(rho),
        loss=decomposition.loss,
        sigma=decomposition.sigma,
    )
