import numpy as np
import pytest
from scipy import stats
from scipy.integrate import simpson, trapezoid

from conftest import random_density
from errors import (AmbiguousModeError, EmptyInputError, GridMismatchError,
                    InvalidParameterError)
from fock_core import DensityMatrix, vacuum
from homodyne import (QuadratureSample, RawTrace, SampleSet, TemporalMode,
                      exponential_envelope, extract_temporal_mode,
                      fock_wavefunctions, gaussian_envelope, marginal_cdf_grid,
                      marginal_pdf, mode_overlap, mode_shift, project_quadrature,
                      sample_quadratures, shift_envelope, simulate_traces,
                      time_grid, traces_to_quadratures)
from preparation import ideal_superposition

GRID = time_grid(10.0, 800.0)


@pytest.fixture
def single_photon():
    return ideal_superposition(0.0, 1.0, 0.0, 10)


@pytest.fixture
def envelope():
    return exponential_envelope(GRID, 100.0, 50.0)


def test_wavefunctions_orthonormal():
    x = np.linspace(-10, 10, 4001)
    psi = fock_wavefunctions(x, 12)
    gram = trapezoid(psi[:, None, :] * psi[None, :, :], x, axis=-1)
    assert np.allclose(gram, np.eye(12), atol=1e-8)


def test_vacuum_marginal():
    assert marginal_pdf(vacuum(6), 0.3, 0.0) == pytest.approx(1 / np.sqrt(np.pi))
    assert isinstance(marginal_pdf(vacuum(6), 0.3, 0.0), float)


@pytest.mark.parametrize("theta", [0.0, np.pi / 3, np.pi / 2, 2.0])
def test_balanced_marginal_mean(balanced, theta):
    x = np.linspace(-8, 8, 3201)
    pdf = marginal_pdf(balanced, theta, x)
    assert trapezoid(pdf, x) == pytest.approx(1.0, abs=1e-8)
    assert trapezoid(x * pdf, x) == pytest.approx(np.cos(theta) / np.sqrt(2), abs=1e-8)


def test_cdf_grid_is_monotone(balanced):
    grid, cdf = marginal_cdf_grid(balanced, 0.5)
    assert grid.size == 4001
    assert cdf[0] == 0.0 and cdf[-1] == pytest.approx(1.0)
    assert np.all(np.diff(cdf) >= 0)


def test_sampling_is_reproducible(balanced):
    a = sample_quadratures(balanced, [0.0, 1.0], 500, seed=3)
    b = sample_quadratures(balanced, [0.0, 1.0], 500, seed=3)
    c = sample_quadratures(balanced, [0.0, 1.0], 500, seed=4)
    assert np.array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)


def test_phase_streams_are_independent(balanced):
    both = sample_quadratures(balanced, [0.0, 1.0], 300, seed=9)
    first = sample_quadratures(balanced, [0.0], 300, seed=9)
    assert np.array_equal(both.x[:300], first.x)


def test_vacuum_sample_variance():
    samples = sample_quadratures(vacuum(8), [0.0], 20000, seed=5)
    assert samples.x.mean() == pytest.approx(0.0, abs=0.02)
    assert samples.x.var() == pytest.approx(0.5, abs=0.03)


def test_samples_follow_marginal(balanced):
    theta = 0.8
    samples = sample_quadratures(balanced, [theta], 20000, seed=21)
    grid, cdf = marginal_cdf_grid(balanced, theta)
    result = stats.kstest(samples.x, lambda v: np.interp(v, grid, cdf))
    assert result.pvalue > 1e-3


def test_sampling_rejects_empty_phases(balanced):
    with pytest.raises(EmptyInputError):
        sample_quadratures(balanced, [], 10, seed=0)


class TestSampleSet:
    def test_phases_wrapped(self):
        samples = SampleSet([-np.pi / 2, 2 * np.pi], [0.1, 0.2])
        assert samples.theta == pytest.approx([1.5 * np.pi, 0.0])
        assert len(samples) == 2

    def test_length_mismatch(self):
        with pytest.raises(InvalidParameterError):
            SampleSet([0.0, 1.0], [0.1])

    def test_records(self):
        records = [QuadratureSample(0.5, 1.0), QuadratureSample(7.0, -1.0)]
        samples = SampleSet.from_records(records)
        assert list(samples) == [QuadratureSample(0.5, 1.0), QuadratureSample(7.0 - 2 * np.pi, -1.0)]
        joined = SampleSet.concatenate([samples, samples])
        assert len(joined) == 4
        assert joined.distinct_phases().size == 2


def test_time_grid():
    assert GRID.size == 80
    assert GRID[1] - GRID[0] == pytest.approx(10.0)
    with pytest.raises(InvalidParameterError):
        time_grid(10.0, 5.0)


def test_temporal_mode_normalization():
    with pytest.raises(InvalidParameterError):
        TemporalMode(GRID, np.ones(GRID.size))
    mode = TemporalMode.normalized(GRID, np.ones(GRID.size))
    assert np.sum(mode.weights ** 2) * mode.dt == pytest.approx(1.0)


def test_envelopes(envelope):
    assert np.all(envelope.weights[GRID < 100.0] == 0.0)
    assert mode_overlap(envelope, envelope) == pytest.approx(1.0)
    shifted = shift_envelope(envelope, 100.0)
    assert mode_overlap(envelope, shifted) < 0.5
    assert mode_shift(envelope, shifted) == pytest.approx(100.0)
    gauss = gaussian_envelope(GRID, 400.0, 50.0)
    assert GRID[np.argmax(gauss.weights)] == pytest.approx(400.0)


def test_projection_recovers_embedded_quadrature(envelope):
    x = np.array([0.3, -1.2, 2.5])
    traces = simulate_traces(x, envelope, noise_seed=1)
    assert np.allclose(traces_to_quadratures(traces, envelope), x, atol=1e-10)
    first = next(iter(traces))
    assert project_quadrature(first, envelope) == pytest.approx(0.3, abs=1e-10)


def test_orthogonal_mode_sees_vacuum_noise(envelope):
    traces = simulate_traces(np.full(5000, 2.0), envelope, noise_seed=4)
    other = gaussian_envelope(GRID, 500.0, 80.0).weights
    other = other - np.sum(other * envelope.weights) * envelope.dt * envelope.weights
    orthogonal = TemporalMode.normalized(GRID, other)
    values = traces_to_quadratures(traces, orthogonal)
    assert values.var() == pytest.approx(0.5, abs=0.05)


def test_projection_grid_mismatch(envelope):
    trace = RawTrace(time_grid(5.0, 400.0), np.zeros(80))
    with pytest.raises(GridMismatchError):
        project_quadrature(trace, envelope)


def test_pca_recovers_envelope(single_photon, envelope):
    x = sample_quadratures(single_photon, [0.0], 5000, seed=12).x
    traces = simulate_traces(x, envelope, noise_seed=13)
    extracted = extract_temporal_mode(traces)
    assert mode_overlap(envelope, extracted) >= 0.99
    assert extracted.weights[np.argmax(np.abs(extracted.weights))] > 0


def test_pca_follows_storage_shift(single_photon, envelope):
    x = sample_quadratures(single_photon, [0.0], 5000, seed=14).x
    shifted = shift_envelope(envelope, 200.0)
    extracted = extract_temporal_mode(simulate_traces(x, shifted, noise_seed=15))
    assert abs(mode_shift(envelope, extracted) - 200.0) <= 10.0
    assert mode_overlap(shifted, extracted) >= 0.99


def test_pca_rejects_vacuum_traces(envelope):
    x = sample_quadratures(vacuum(6), [0.0], 5000, seed=16).x
    with pytest.raises(AmbiguousModeError):
        extract_temporal_mode(simulate_traces(x, envelope, noise_seed=17))


def test_pca_needs_enough_traces(single_photon, envelope):
    x = sample_quadratures(single_photon, [0.0], 50, seed=18).x
    with pytest.raises(InvalidParameterError):
        extract_temporal_mode(simulate_traces(x, envelope, noise_seed=19))


class TestMarginalProperties:
    @pytest.mark.parametrize("dim", [2, 4, 6, 8])
    def test_normalized_for_random_states(self, rng, dim):
        x = np.linspace(-6.0, 6.0, 2401)
        for _ in range(5):
            rho = random_density(rng, dim)
            theta = rng.uniform(0.0, 2 * np.pi)
            assert simpson(marginal_pdf(rho, theta, x), x=x) == pytest.approx(1.0, abs=1e-6)

    def test_normalized_at_compute_dimension(self, rng):
        # n = 19 reaches past |x| = 6, so integrate further out
        x = np.linspace(-9.0, 9.0, 3601)
        rho = random_density(rng, 20)
        assert simpson(marginal_pdf(rho, 1.1, x), x=x) == pytest.approx(1.0, abs=1e-6)

    def test_fock_diagonal_states_are_phase_blind(self, rng):
        weights = rng.dirichlet(np.ones(8))
        rho = DensityMatrix.from_unnormalized(np.diag(weights).astype(complex))
        x = np.linspace(-5.0, 5.0, 201)
        reference = marginal_pdf(rho, 0.0, x)
        for theta in (0.3, np.pi / 2, 2.2, 5.0):
            assert np.allclose(marginal_pdf(rho, theta, x), reference, rtol=0, atol=1e-12)

    def test_sample_cdf_within_ks_bound(self, asymmetric):
        n = 20000
        samples = sample_quadratures(asymmetric, [1.3], n, seed=33)
        grid, cdf = marginal_cdf_grid(asymmetric, 1.3)
        statistic = stats.kstest(samples.x, lambda v: np.interp(v, grid, cdf)).statistic
        assert statistic < 1.63 / np.sqrt(n)


def test_pca_recovers_gaussian_envelope(single_photon):
    envelope = gaussian_envelope(GRID, 300.0, 60.0)
    x = sample_quadratures(single_photon, [0.0], 5000, seed=22).x
    extracted = extract_temporal_mode(simulate_traces(x, envelope, noise_seed=23))
    assert mode_overlap(envelope, extracted) >= 0.99


def test_pca_on_default_grid_finds_single_photon(single_photon):
    times = time_grid(2.0, 2000.0)
    envelope = exponential_envelope(times, 100.0, 50.0)
    x = sample_quadratures(single_photon, [0.0], 10000, seed=24).x
    extracted = extract_temporal_mode(simulate_traces(x, envelope, noise_seed=25))
    assert mode_overlap(envelope, extracted) >= 0.9
    assert abs(mode_shift(envelope, extracted)) <= 2.0
