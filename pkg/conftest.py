"""Shared pytest fixtures for the simulator test suites."""

import os

# Keep test runs out of logs/; set before config is first imported.
os.environ.setdefault("QMEM_LOG_FILE", "")
os.environ.setdefault("QMEM_LOG_FORMAT", "plain")

import logging

import numpy as np
import pytest

from config import get_logger
from fock_core import DensityMatrix
from preparation import ideal_superposition

BALANCED_WMIN = -0.11339
BALANCED_WMIN_X = -0.4871


@pytest.fixture
def balanced():
    """(|0> + |1>)/sqrt(2) at dim 10."""
    return ideal_superposition(np.sqrt(0.5), np.sqrt(0.5), 0.0, 10)


@pytest.fixture
def asymmetric():
    """(|0> + sqrt(2)|1>)/sqrt(3) at dim 10."""
    return ideal_superposition(np.sqrt(1.0 / 3.0), np.sqrt(2.0 / 3.0), 0.0, 10)


@pytest.fixture
def mixture():
    return DensityMatrix(np.diag([0.5, 0.3, 0.2]).astype(complex))


def random_density(rng, dim, rank=None):
    """Random full- or low-rank density matrix from a complex Ginibre draw."""
    g = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    return DensityMatrix.from_unnormalized(g @ g.conj().T)


def min_eigenvalue(rho):
    return float(np.linalg.eigvalsh(rho.matrix).min())


@pytest.fixture
def qmem_log(caplog):
    """caplog wired to the non-propagating package logger."""
    logger = get_logger()
    logger.addHandler(caplog.handler)
    caplog.set_level(logging.DEBUG, logger=logger.name)
    yield caplog
    logger.removeHandler(caplog.handler)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def experiment_file(tmp_path):
    """Small, fast experiment description."""
    path = tmp_path / "run.cfg"
    path.write_text(
        "# quick run\n"
        "ideal.alpha = 0.7071067811865476\n"
        "ideal.beta = 0.7071067811865476\n"
        "memory.half_life_us = 1.3\n"
        "memory.detuning_khz = 300\n"
        "acquisition.storage_times_ns = 0, 400\n"
        "acquisition.phases_deg = 0, 30, 60, 90, 120, 150\n"
        "acquisition.n_per_phase = 3000\n"
        "acquisition.seed = 11\n"
        "acquisition.dim = 8\n"
        "analysis.reconstruction_dim = 6\n"
        "analysis.gamma_max = 1.0\n"
        "analysis.gamma_step = 0.25\n",
        encoding="utf-8",
    )
    return path
