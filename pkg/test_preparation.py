import numpy as np
import pytest

from config import PreparationConfig
from conftest import min_eigenvalue
from errors import (DegenerateHeraldError, InvalidParameterError,
                    NonNormalizableError)
from fock_core import mean_photon_number
from preparation import (ClickModel, PreparationParams, admix_fake_clicks,
                         balanced_displacement, herald_rate,
                         herald_superposition, heralded_single_photon,
                         ideal_superposition, two_mode_squeezed_vacuum)


def test_two_mode_squeezed_vacuum_amplitudes():
    c = two_mode_squeezed_vacuum(0.3, 12)
    assert np.allclose(c - np.diag(c.diagonal()), 0.0)
    assert c[2, 2] == pytest.approx(np.sqrt(1 - 0.09) * 0.09)
    assert np.sum(c ** 2) == pytest.approx(1.0 - 0.3 ** 24, abs=1e-15)


@pytest.mark.parametrize("lambda_, error", [(1.0, NonNormalizableError), (1.5, NonNormalizableError),
                                            (-0.1, InvalidParameterError)])
def test_lambda_range(lambda_, error):
    with pytest.raises(error):
        PreparationParams(lambda_)


def test_blocked_displacement_heralds_single_photon():
    result = heralded_single_photon(0.1, dim=10)
    assert result.state[1, 1].real == pytest.approx(1.0, abs=1e-12)
    assert result.click_probability == pytest.approx((1 - 0.01) * 0.01, rel=1e-12)


def test_fake_clicks_admix_vacuum():
    result = heralded_single_photon(0.1, eta=0.9, dim=10)
    assert result.state[0, 0].real == pytest.approx(0.1, abs=1e-12)
    assert result.state[1, 1].real == pytest.approx(0.9, abs=1e-12)


def test_not_vacuum_model_keeps_thermal_tail():
    params = PreparationParams(0.3, click_model=ClickModel.NOT_VACUUM)
    rho = herald_superposition(params, 12).state
    assert rho[0, 0].real == pytest.approx(0.0, abs=1e-15)
    assert rho[2, 2].real / rho[1, 1].real == pytest.approx(0.09, rel=1e-10)


def test_balanced_displacement_value():
    assert balanced_displacement(0.1) == pytest.approx(0.0990195135927848, abs=1e-12)
    with pytest.raises(InvalidParameterError):
        balanced_displacement(0.0)


def test_balanced_herald_has_equal_weights():
    delta = balanced_displacement(0.1)
    rho = herald_superposition(PreparationParams(0.1, delta), 20).state
    assert rho[0, 0].real == pytest.approx(rho[1, 1].real, abs=1e-9)
    assert rho[2, 2].real < 1e-3
    assert rho[0, 1].real > 0
    assert abs(rho[0, 1].imag) < 1e-12


def test_herald_phase_follows_displacement():
    phase = 0.7
    delta = balanced_displacement(0.1) * np.exp(1j * phase)
    rho = herald_superposition(PreparationParams(0.1, delta), 20).state
    assert np.angle(rho[0, 1]) == pytest.approx(phase, abs=1e-9)


def test_degenerate_herald():
    with pytest.raises(DegenerateHeraldError):
        herald_superposition(PreparationParams(0.0, 0.0), 10)


def test_from_config():
    section = PreparationConfig.model_validate({"lambda": 0.2, "delta_re": 0.1, "delta_im": -0.05,
                                                "click_model": "not_vacuum", "eta": 0.95})
    params = PreparationParams.from_config(section)
    assert params.lambda_ == 0.2
    assert params.idler_displacement == complex(0.1, -0.05)
    assert params.click_model is ClickModel.NOT_VACUUM
    assert params.eta == 0.95


def test_ideal_superposition():
    rho = ideal_superposition(np.sqrt(0.5), np.sqrt(0.5), np.pi / 3, 6)
    assert rho.dim == 6
    assert np.angle(rho[1, 0]) == pytest.approx(np.pi / 3)
    assert mean_photon_number(rho) == pytest.approx(0.5)
    with pytest.raises(InvalidParameterError):
        ideal_superposition(0.6, 0.6, 0.0, 6)
    with pytest.raises(InvalidParameterError):
        ideal_superposition(-0.6, 0.8, 0.0, 6)


def test_admix_fake_clicks(balanced):
    mixed = admix_fake_clicks(balanced, 0.8)
    assert mixed[0, 0].real == pytest.approx(0.6)
    assert mixed[0, 1] == pytest.approx(0.4)
    assert admix_fake_clicks(balanced, 1.0) is balanced
    with pytest.raises(InvalidParameterError):
        admix_fake_clicks(balanced, 1.2)


def test_herald_rate():
    assert herald_rate(1e-3, 1e6) == pytest.approx(1000.0)
    assert herald_rate(1e-3, 1e6, eta=0.5) == pytest.approx(2000.0)
    with pytest.raises(InvalidParameterError):
        herald_rate(1e-3, 1e6, eta=0.0)


@pytest.mark.parametrize("click_model", list(ClickModel))
@pytest.mark.parametrize("lambda_", [0.05, 0.2, 0.5])
@pytest.mark.parametrize("delta", [0.0, 0.1, 0.25j, 0.3 - 0.2j])
@pytest.mark.parametrize("eta", [1.0, 0.7])
def test_heralded_states_are_valid(click_model, lambda_, delta, eta):
    rho = herald_superposition(PreparationParams(lambda_, delta, click_model, eta), 24).state
    assert np.allclose(rho.matrix, rho.matrix.conj().T, atol=1e-14)
    assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-12)
    assert min_eigenvalue(rho) >= -1e-12


@pytest.mark.parametrize("lambda_", [0.02, 0.05, 0.1])
@pytest.mark.parametrize("delta", [0.0, 0.05, -0.1, 0.15j])
def test_exact_herald_qubit_block_is_nearly_pure(lambda_, delta):
    rho = herald_superposition(PreparationParams(lambda_, delta), 20).state
    block = rho.matrix[:2, :2] / np.trace(rho.matrix[:2, :2]).real
    assert np.trace(block @ block).real >= 1 - lambda_ ** 2


def test_displacement_controls_vacuum_weight():
    ratios = []
    for delta in np.linspace(0.0, 0.3, 13):
        rho = herald_superposition(PreparationParams(0.1, delta), 20).state
        ratios.append(rho[0, 0].real / rho[1, 1].real)
    assert ratios[0] == pytest.approx(0.0, abs=1e-15)
    assert np.all(np.diff(ratios) > 0)
