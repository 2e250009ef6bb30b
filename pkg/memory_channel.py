"""
Cavity Memory Channel

The storage channel acting on a released single-mode state:

- amplitude damping with loss L = 1 - 2^(-t / half_life)
- detuning rotation rho_mn -> rho_mn exp(-i 2 pi f t (m - n))
- Gaussian dephasing rho_mn -> rho_mn exp(-sigma^2 (m - n)^2 / 2)

Times are in seconds and frequencies in hertz throughout this module.
The rotation sense makes arg(rho_01) grow with storage time, so the Wigner
function turns clockwise in the (x, p) plane.

Required packages: numpy, scipy
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import List

import numpy as np
from scipy.special import comb

from config import MemoryConfig, get_logger
from errors import InvalidParameterError
from fock_core import DensityMatrix, check_dim
from preparation import admix_fake_clicks

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class MemoryParams:
    """
    Channel description in SI units.

    Attributes:
        half_life (float): photon-survival half-life in seconds
        detuning (float): memory/LO frequency offset in hertz
        dephasing_sigma (float): Gaussian phase-noise std in radians
        eta (float): true-click fraction; the vacuum admixture commutes with the channel
        initial_loss (float): loss already present at zero storage time
    """
    half_life: float = 1.3e-6
    detuning: float = 300e3
    dephasing_sigma: float = 0.0
    eta: float = 1.0
    initial_loss: float = 0.0

    def __post_init__(self):
        if not self.half_life > 0:
            raise InvalidParameterError(f"half_life must be positive, got {self.half_life}")
        if not np.isfinite(self.detuning):
            raise InvalidParameterError(f"detuning must be finite, got {self.detuning}")
        if self.dephasing_sigma < 0:
            raise InvalidParameterError(f"dephasing_sigma must be non-negative, got {self.dephasing_sigma}")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidParameterError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.initial_loss <= 1.0:
            raise InvalidParameterError(f"initial_loss must lie in [0, 1], got {self.initial_loss}")

    @classmethod
    def from_config(cls, section: MemoryConfig) -> "MemoryParams":
        """Convert the laboratory-unit config keys (us, kHz, degrees)."""
        return cls(
            half_life=section.half_life_us * 1e-6,
            detuning=section.detuning_khz * 1e3,
            dephasing_sigma=float(np.deg2rad(section.sigma_deg)),
            eta=section.eta,
            initial_loss=section.initial_loss,
        )


def _check_time(t: float) -> None:
    if t < 0:
        raise InvalidParameterError(f"Storage time must be non-negative, got {t}")


def loss_from_storage(t: float, half_life: float) -> float:
    """L = 1 - 2^(-t / half_life)."""
    _check_time(t)
    if not half_life > 0:
        raise InvalidParameterError(f"half_life must be positive, got {half_life}")
    return float(-np.expm1(-np.log(2.0) * t / half_life))


def storage_efficiency(t: float, half_life: float) -> float:
    return 1.0 - loss_from_storage(t, half_life)


def half_life_from_round_trip(loss_per_round_trip: float, round_trip_m: float) -> float:
    """
    Half-life implied by a per-round-trip loss and the cavity round-trip length.

    A 0.2% loss over a 1.5 m round trip gives about 1.7 us.
    """
    if not 0.0 < loss_per_round_trip < 1.0:
        raise InvalidParameterError(f"Round-trip loss must lie in (0, 1), got {loss_per_round_trip}")
    if not round_trip_m > 0:
        raise InvalidParameterError(f"Round-trip length must be positive, got {round_trip_m}")
    round_trip_time = round_trip_m / SPEED_OF_LIGHT
    return float(round_trip_time * np.log(2.0) / -np.log1p(-loss_per_round_trip))


@lru_cache(maxsize=8)
def _binomials(dim: int) -> np.ndarray:
    n = np.arange(dim)
    table = comb(n[:, None], n[None, :])
    table.setflags(write=False)
    return table


def damping_kraus(loss: float, dim: int) -> List[np.ndarray]:
    """K_k = sum_n sqrt(C(n, k) (1-L)^(n-k) L^k) |n-k><n| for k = 0..dim-1."""
    if not 0.0 <= loss <= 1.0:
        raise InvalidParameterError(f"Loss must lie in [0, 1], got {loss}")
    dim = check_dim(dim)
    binom = _binomials(dim)
    n = np.arange(dim)
    operators = []
    for k in range(dim):
        ops = np.zeros((dim, dim))
        src = n[k:]
        ops[src - k, src] = np.sqrt(binom[src, k] * (1.0 - loss) ** (src - k) * loss ** k)
        operators.append(ops)
    return operators


def amplitude_damping(rho: DensityMatrix, loss: float) -> DensityMatrix:
    """Bosonic loss channel sum_k K_k rho K_k^dag."""
    if loss == 0.0:
        return rho
    out = np.zeros_like(rho.matrix)
    for kraus in damping_kraus(loss, rho.dim):
        out += kraus @ rho.matrix @ kraus.T
    out = 0.5 * (out + out.conj().T)
    # Kraus sum is trace preserving; rescale only the rounding.
    return DensityMatrix(out / np.trace(out).real)


def _difference_grid(dim: int) -> np.ndarray:
    n = np.arange(dim)
    return n[:, None] - n[None, :]


def detuning_rotation(rho: DensityMatrix, detuning: float, t: float) -> DensityMatrix:
    """rho_mn -> rho_mn exp(-i 2 pi detuning t (m - n))."""
    _check_time(t)
    angle = 2.0 * np.pi * detuning * t
    if angle == 0.0:
        return rho
    return DensityMatrix(rho.matrix * np.exp(-1j * angle * _difference_grid(rho.dim)))


def gaussian_dephasing(rho: DensityMatrix, sigma: float) -> DensityMatrix:
    """rho_mn -> rho_mn exp(-sigma^2 (m - n)^2 / 2)."""
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0.0:
        return rho
    factor = np.exp(-0.5 * sigma ** 2 * _difference_grid(rho.dim) ** 2)
    return DensityMatrix(rho.matrix * factor)


def total_loss(params: MemoryParams, t: float) -> float:
    """Initial loss combined with the storage decay at time t."""
    return 1.0 - (1.0 - params.initial_loss) * storage_efficiency(t, params.half_life)


def store(rho: DensityMatrix, params: MemoryParams, t: float) -> DensityMatrix:
    """
    Storage for time t: amplitude damping, then detuning rotation, then dephasing.

    The fake-click admixture eta rho + (1 - eta)|0><0| is applied last; it
    commutes with all three maps since each leaves the vacuum fixed.
    """
    _check_time(t)
    loss = total_loss(params, t)
    out = amplitude_damping(rho, loss)
    out = detuning_rotation(out, params.detuning, t)
    out = gaussian_dephasing(out, params.dephasing_sigma)
    out = admix_fake_clicks(out, params.eta)
    get_logger().debug(
        f"Stored for {t * 1e9:.1f} ns: L={loss:.5f}, rho11={out[1, 1].real:.5f}, "
        f"arg(rho01)={np.angle(out[0, 1]):.5f}")
    return out
