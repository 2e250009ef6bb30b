import itertools

import numpy as np
import pytest

from config import MemoryConfig
from conftest import min_eigenvalue, random_density
from errors import InvalidParameterError
from fock_core import DensityMatrix, coherent_state, fock_state, mean_photon_number
from memory_channel import (MemoryParams, amplitude_damping, damping_kraus,
                            detuning_rotation, gaussian_dephasing,
                            half_life_from_round_trip, loss_from_storage,
                            storage_efficiency, store, total_loss)
from preparation import admix_fake_clicks

DETUNING = 300e3
STEP_PHASE = 2 * np.pi * DETUNING * 200e-9  # 0.376991...


def test_loss_from_storage():
    assert loss_from_storage(0.0, 1.3e-6) == 0.0
    assert loss_from_storage(1.3e-6, 1.3e-6) == pytest.approx(0.5)
    assert storage_efficiency(2.6e-6, 1.3e-6) == pytest.approx(0.25)
    with pytest.raises(InvalidParameterError):
        loss_from_storage(-1e-9, 1.3e-6)


def test_half_life_from_round_trip():
    assert half_life_from_round_trip(0.002, 1.5) == pytest.approx(1.73e-6, rel=0.01)
    with pytest.raises(InvalidParameterError):
        half_life_from_round_trip(0.0, 1.5)


def test_kraus_completeness():
    ops = damping_kraus(0.37, 12)
    total = sum(k.T @ k for k in ops)
    assert np.allclose(total, np.eye(12), atol=1e-12)


def test_damping_single_photon():
    rho = amplitude_damping(fock_state(1, 6), 0.3)
    assert rho[1, 1].real == pytest.approx(0.7)
    assert rho[0, 0].real == pytest.approx(0.3)


def test_damping_coherent_state_stays_coherent():
    rho = amplitude_damping(coherent_state(1.0, 30), 0.36)
    expected = coherent_state(0.8, 30)
    assert np.allclose(rho.matrix, expected.matrix, atol=1e-9)


def test_damping_coherence(balanced):
    rho = amplitude_damping(balanced, 0.5)
    assert abs(rho[0, 1]) == pytest.approx(0.5 * np.sqrt(0.5))
    assert mean_photon_number(rho) == pytest.approx(0.25)


def test_detuning_rotation_advances_coherence_phase(balanced):
    rho = detuning_rotation(balanced, DETUNING, 200e-9)
    assert np.angle(rho[0, 1]) == pytest.approx(0.376991118430775, abs=1e-12)
    assert abs(rho[0, 1]) == pytest.approx(0.5)
    twice = detuning_rotation(balanced, DETUNING, 400e-9)
    assert np.angle(twice[1, 0]) == pytest.approx(-2 * STEP_PHASE, abs=1e-12)


def test_dephasing_suppresses_coherences(balanced):
    sigma = np.deg2rad(28.0)
    rho = gaussian_dephasing(balanced, sigma)
    assert abs(rho[0, 1]) == pytest.approx(0.5 * np.exp(-0.5 * sigma ** 2))
    assert np.allclose(rho.diagonal, balanced.diagonal)


def test_store_composition(balanced):
    params = MemoryParams(half_life=1.3e-6, detuning=DETUNING, dephasing_sigma=0.2, eta=0.9)
    t = 400e-9
    rho = store(balanced, params, t)
    loss = loss_from_storage(t, 1.3e-6)
    assert rho[1, 1].real == pytest.approx(0.9 * 0.5 * (1 - loss), abs=1e-12)
    assert abs(rho[0, 1]) == pytest.approx(0.9 * 0.5 * np.sqrt(1 - loss) * np.exp(-0.02), abs=1e-12)
    assert np.angle(rho[1, 0]) == pytest.approx(-0.75398223686155, abs=1e-12)
    assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-12)


def test_store_phase_is_independent_of_loss(balanced):
    for half_life in (1.3e-6, 0.3e-6):
        rho = store(balanced, MemoryParams(half_life=half_life, detuning=DETUNING), 200e-9)
        assert np.angle(rho[0, 1]) == pytest.approx(STEP_PHASE, abs=1e-12)


def test_store_at_zero_time_is_initial_loss_and_fake_clicks(balanced):
    params = MemoryParams(initial_loss=0.2, eta=0.95, dephasing_sigma=0.0)
    expected = admix_fake_clicks(amplitude_damping(balanced, 0.2), 0.95)
    assert np.allclose(store(balanced, params, 0.0).matrix, expected.matrix, atol=1e-14)


def test_total_loss():
    params = MemoryParams(half_life=1.3e-6, initial_loss=0.2)
    assert total_loss(params, 1.3e-6) == pytest.approx(0.6)


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        MemoryParams(half_life=0.0)
    with pytest.raises(InvalidParameterError):
        MemoryParams(eta=1.1)
    with pytest.raises(InvalidParameterError):
        MemoryParams(dephasing_sigma=-0.1)
    with pytest.raises(InvalidParameterError):
        store(fock_state(1, 4), MemoryParams(), -1e-9)


def test_params_from_config():
    params = MemoryParams.from_config(MemoryConfig(half_life_us=1.3, detuning_khz=300, sigma_deg=28, eta=0.9))
    assert params.half_life == pytest.approx(1.3e-6)
    assert params.detuning == pytest.approx(3e5)
    assert params.dephasing_sigma == pytest.approx(np.deg2rad(28))
    assert params.eta == 0.9


class TestChannelProperties:
    MAPS = {
        "damping": lambda rho, rng: amplitude_damping(rho, rng.uniform(0.0, 1.0)),
        "detuning": lambda rho, rng: detuning_rotation(rho, rng.uniform(-1e6, 1e6), rng.uniform(0.0, 2e-6)),
        "dephasing": lambda rho, rng: gaussian_dephasing(rho, rng.uniform(0.0, 1.5)),
        "store": lambda rho, rng: store(rho, MemoryParams(dephasing_sigma=rng.uniform(0.0, 1.0),
                                                          eta=rng.uniform(0.5, 1.0)), rng.uniform(0.0, 2e-6)),
    }

    @pytest.mark.parametrize("name", sorted(MAPS))
    def test_trace_and_positivity_preserved(self, rng, name):
        for _ in range(25):
            rho = random_density(rng, int(rng.integers(2, 12)))
            out = self.MAPS[name](rho, rng)
            assert np.trace(out.matrix).real == pytest.approx(1.0, abs=1e-12)
            assert min_eigenvalue(out) >= -1e-10

    def test_damping_semigroup(self, rng):
        rho = random_density(rng, 10)
        for l1, l2 in ((0.1, 0.2), (0.35, 0.6), (0.9, 0.05)):
            twice = amplitude_damping(amplitude_damping(rho, l1), l2)
            once = amplitude_damping(rho, 1 - (1 - l1) * (1 - l2))
            assert np.allclose(twice.matrix, once.matrix, rtol=0, atol=1e-10)

    def test_dephasing_semigroup(self, rng):
        rho = random_density(rng, 10)
        for s1, s2 in ((0.1, 0.2), (0.4887, 0.3), (1.0, 0.7)):
            twice = gaussian_dephasing(gaussian_dephasing(rho, s1), s2)
            once = gaussian_dephasing(rho, np.hypot(s1, s2))
            assert np.allclose(twice.matrix, once.matrix, rtol=0, atol=1e-10)

    def test_maps_commute_on_qubit_block(self, rng):
        maps = [lambda r: amplitude_damping(r, 0.27),
                lambda r: detuning_rotation(r, DETUNING, 330e-9),
                lambda r: gaussian_dephasing(r, 0.45)]
        block = random_density(rng, 2).matrix
        rho = DensityMatrix(np.pad(block, ((0, 4), (0, 4))))
        results = []
        for order in itertools.permutations(maps):
            out = rho
            for step in order:
                out = step(out)
            results.append(out.matrix)
        for other in results[1:]:
            assert np.allclose(other, results[0], rtol=0, atol=1e-12)

    def test_store_matches_qubit_block_composite(self, rng):
        block = random_density(rng, 2).matrix
        rho = DensityMatrix(np.pad(block, ((0, 4), (0, 4))))
        sigma, t = 0.4, 500e-9
        loss = loss_from_storage(t, 1.3e-6)
        out = store(rho, MemoryParams(dephasing_sigma=sigma), t)
        assert out[1, 1].real == pytest.approx((1 - loss) * block[1, 1].real, abs=1e-12)
        assert abs(out[0, 1]) == pytest.approx(np.sqrt(1 - loss) * np.exp(-sigma ** 2 / 2) * abs(block[0, 1]),
                                               abs=1e-12)
