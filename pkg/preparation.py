"""
Heralded State Preparation

Models conditional creation of a|0> + b e^{i theta}|1> in a signal mode:
a two-mode squeezed vacuum sum_n c_n |n>_s |n>_i is produced, the idler is
displaced by an auxiliary coherent beam D(delta), and a click on the idler
detector heralds the signal state. Fake clicks herald vacuum.

Phase convention: for the exact-one-photon click model and real lambda the
heralded state is proportional to delta|0> + lambda|1> to leading order, so
theta = -arg(delta) and arg(rho_01) = arg(delta).

Required packages: numpy
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from config import PreparationConfig, get_config, get_logger
from errors import (DegenerateHeraldError, InvalidParameterError,
                    NonNormalizableError)
from fock_core import (DensityMatrix, check_dim, displacement_operator,
                       fock_state)


class ClickModel(str, Enum):
    """Idler detector model."""
    EXACT_ONE_PHOTON = "exact_one_photon"
    NOT_VACUUM = "not_vacuum"


@dataclass(frozen=True)
class PreparationParams:
    """Source and heralding parameters."""
    lambda_: float
    idler_displacement: complex = 0.0
    click_model: ClickModel = ClickModel.EXACT_ONE_PHOTON
    eta: float = 1.0

    def __post_init__(self):
        _check_lambda(self.lambda_)
        _check_eta(self.eta)
        object.__setattr__(self, "click_model", ClickModel(self.click_model))
        object.__setattr__(self, "idler_displacement", complex(self.idler_displacement))

    @classmethod
    def from_config(cls, section: PreparationConfig) -> "PreparationParams":
        return cls(
            lambda_=section.lambda_,
            idler_displacement=complex(section.delta_re, section.delta_im),
            click_model=ClickModel(section.click_model),
            eta=section.eta,
        )


@dataclass(frozen=True)
class HeraldResult:
    """Heralded signal state and the per-trial true-click probability."""
    state: DensityMatrix
    click_probability: float


def _check_lambda(lambda_: float) -> None:
    if lambda_ >= 1.0:
        raise NonNormalizableError(f"Two-mode squeezed vacuum needs lambda < 1, got {lambda_}")
    if lambda_ < 0.0:
        raise InvalidParameterError(f"lambda must be non-negative, got {lambda_}")


def _check_eta(eta: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"eta must lie in [0, 1], got {eta}")


def two_mode_squeezed_vacuum(lambda_: float, dim: int) -> np.ndarray:
    """
    Amplitude tensor c_mn of the two-mode squeezed vacuum.

    c_nn = sqrt(1 - lambda^2) lambda^n and c_mn = 0 off the diagonal; the
    norm falls short of 1 by lambda^(2 dim) from truncation.

    Args:
        lambda_ (float): tanh of the squeezing parameter, in [0, 1)
        dim (int): Fock truncation of each mode

    Returns:
        np.ndarray: real (dim, dim) amplitude matrix indexed [signal, idler]
    """
    dim = check_dim(dim)
    _check_lambda(lambda_)
    amplitudes = np.sqrt(1.0 - lambda_ ** 2) * lambda_ ** np.arange(dim)
    return np.diag(amplitudes)


def admix_fake_clicks(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """eta rho + (1 - eta)|0><0|."""
    _check_eta(eta)
    if eta == 1.0:
        return rho
    vac = fock_state(0, rho.dim).matrix
    return DensityMatrix(eta * rho.matrix + (1.0 - eta) * vac)


def herald_superposition(params: PreparationParams, dim: Optional[int] = None) -> HeraldResult:
    """
    Signal state conditioned on an idler click.

    Contracts the displaced two-mode state with the click projector:
    |1><1| for EXACT_ONE_PHOTON, I - |0><0| for NOT_VACUUM. The fake-click
    admixture with params.eta is applied afterwards.

    Raises:
        DegenerateHeraldError: if the click has zero probability.
    """
    logger = get_logger()
    dim = check_dim(dim if dim is not None else get_config().compute_dim)
    amplitudes = two_mode_squeezed_vacuum(params.lambda_, dim).diagonal()
    idler_d = displacement_operator(params.idler_displacement, dim).matrix

    # Row k: unnormalized signal vector for idler outcome |k>.
    branches = amplitudes[None, :] * idler_d
    if params.click_model is ClickModel.EXACT_ONE_PHOTON:
        clicked = branches[1:2]
    else:
        clicked = branches[1:]
    unnormalized = clicked.T @ clicked.conj()
    click_probability = float(np.trace(unnormalized).real)
    if click_probability <= 1e-300:
        raise DegenerateHeraldError(
            f"Click probability vanishes (lambda={params.lambda_}, model={params.click_model.value})")

    state = DensityMatrix.from_unnormalized(unnormalized)
    state = admix_fake_clicks(state, params.eta)
    logger.debug(
        f"Heralded state: lambda={params.lambda_}, delta={params.idler_displacement:.4f}, "
        f"P(click)={click_probability:.4e}, rho00={state[0, 0].real:.4f}, rho11={state[1, 1].real:.4f}")
    return HeraldResult(state=state, click_probability=click_probability)


def heralded_single_photon(lambda_: float, eta: float = 1.0, dim: Optional[int] = None) -> HeraldResult:
    """Preliminary run with the displacement beam blocked."""
    return herald_superposition(PreparationParams(lambda_=lambda_, eta=eta), dim)


def ideal_superposition(alpha: float, beta: float, theta: float, dim: Optional[int] = None) -> DensityMatrix:
    """
    Pure state alpha|0> + beta e^{i theta}|1> embedded at dim.

    Raises:
        InvalidParameterError: if alpha, beta are negative or alpha^2 + beta^2 != 1.
    """
    if alpha < 0 or beta < 0:
        raise InvalidParameterError(f"alpha and beta must be non-negative, got {alpha}, {beta}")
    if abs(alpha ** 2 + beta ** 2 - 1.0) > 1e-9:
        raise InvalidParameterError(f"alpha^2 + beta^2 = {alpha ** 2 + beta ** 2!r}, expected 1")
    dim = check_dim(dim if dim is not None else get_config().compute_dim)
    vec = np.zeros(dim, dtype=complex)
    vec[0] = alpha
    vec[1] = beta * np.exp(1j * theta)
    return DensityMatrix.from_pure(vec)


def balanced_displacement(lambda_: float) -> float:
    """
    Real idler displacement giving rho_00 = rho_11 in the weak-pump limit.

    Solves delta = lambda (1 - delta^2), the balance of the vacuum and
    single-photon amplitudes of the exact-one-photon projection.
    """
    _check_lambda(lambda_)
    if lambda_ == 0.0:
        raise InvalidParameterError("No displacement balances a vacuum source (lambda = 0)")
    return float((np.sqrt(1.0 + 4.0 * lambda_ ** 2) - 1.0) / (2.0 * lambda_))


def herald_rate(click_probability: float, trial_rate: float, eta: float = 1.0) -> float:
    """
    Total herald count rate (true plus fake clicks) in counts per second.

    Args:
        click_probability (float): true-click probability per trial
        trial_rate (float): trials per second
        eta (float): fraction of clicks that are true
    """
    _check_eta(eta)
    if eta == 0.0:
        raise InvalidParameterError("eta = 0 leaves no true clicks to scale from")
    if click_probability < 0 or trial_rate < 0:
        raise InvalidParameterError("click probability and trial rate must be non-negative")
    return click_probability * trial_rate / eta
