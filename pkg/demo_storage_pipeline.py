"""
Storage Pipeline Demo

Walks a heralded balanced qubit through the cavity memory and shows what
happens to it at each storage time:

- heralded preparation from a displaced-idler two-mode squeezed vacuum
- memory loss, detuning rotation and dephasing
- Wigner-function minimum and the angle it turns through
- the non-Gaussianity witness before and after Gaussian correction
- loss / dephasing decomposition
- one full simulate -> reconstruct -> analyze run written to outputs/demo

Usage:
    python demo_storage_pipeline.py
"""

import numpy as np

from analysis import (corrected_delta_curve, estimate_loss_dephasing,
                      gamma_scan, nongaussianity_delta, wigner_minimum)
from config import ExperimentConfig, get_logger
from fock_core import mean_photon_number
from memory_channel import MemoryParams, store, total_loss
from preparation import (PreparationParams, balanced_displacement,
                         herald_superposition)
from storage_experiment import StorageExperiment


def demo_preparation():
    """Herald a balanced qubit and report its 0/1 block."""
    logger = get_logger()
    logger.info("=== Heralded Preparation ===")

    lambda_ = 0.1
    delta = balanced_displacement(lambda_)
    herald = herald_superposition(PreparationParams(lambda_, delta))
    rho = herald.state
    logger.info(f"lambda = {lambda_}, idler displacement delta = {delta:.6f}")
    logger.info(f"click probability per trial: {herald.click_probability:.3e}")
    logger.info(f"rho_00 = {rho[0, 0].real:.4f}, rho_11 = {rho[1, 1].real:.4f}, |rho_01| = {abs(rho[0, 1]):.4f}")
    logger.info(f"two-photon weight: {rho[2, 2].real:.2e}, mean photon number {mean_photon_number(rho):.4f}")
    return rho


def demo_storage(rho):
    """Store the state and follow its Wigner minimum."""
    logger = get_logger()
    logger.info("=== Storage in the Memory ===")

    memory = MemoryParams(half_life=1.3e-6, detuning=300e3, dephasing_sigma=np.deg2rad(28.0), eta=29 / 30)
    for t_ns in (0.0, 200.0, 400.0, 800.0):
        stored = store(rho, memory, t_ns * 1e-9)
        minimum = wigner_minimum(stored)
        angle = np.degrees(np.arctan2(minimum.point.p, minimum.point.x))
        logger.info(
            f"t = {t_ns:5.0f} ns: loss {total_loss(memory, t_ns * 1e-9):.3f}, "
            f"W_min {minimum.value:+.4f} at angle {angle:7.1f} deg, "
            f"arg rho_01 {np.angle(stored[0, 1]):+.4f} rad")
    return store(rho, memory, 400e-9)


def demo_witness(rho):
    """Witness value and its Gaussian-corrected scan."""
    logger = get_logger()
    logger.info("=== Non-Gaussianity Witness ===")

    logger.info(f"Delta at the origin: {nongaussianity_delta(rho):+.5f}")
    curve = corrected_delta_curve(rho, gamma_scan(1.0, 0.05))
    logger.info(f"dip direction phi = {np.degrees(curve.phi):.1f} deg")
    logger.info(f"corrected minimum {curve.min_delta:+.5f} at gamma = {curve.argmin_gamma:.2f}")
    logger.info("state is certified non-Gaussian" if curve.enters_negative
                else "witness does not certify non-Gaussianity")


def demo_decomposition(rho):
    logger = get_logger()
    logger.info("=== Loss / Dephasing Decomposition ===")

    result = estimate_loss_dephasing(rho, np.sqrt(0.5), np.sqrt(0.5))
    logger.info(f"inferred loss {result.loss:.3f}, dephasing {np.degrees(result.sigma):.1f} deg")


def demo_pipeline():
    """Full run with the default ideal source; small sample counts keep it quick."""
    logger = get_logger()
    logger.info("=== Full Pipeline ===")

    experiment = ExperimentConfig.model_validate({
        "acquisition": {"storage_times_ns": [0, 200, 400], "n_per_phase": 5000, "seed": 7},
        "output": {"dir": "outputs/demo"},
    })
    results = StorageExperiment(experiment).run_pipeline()
    for r in results:
        logger.info(f"t = {r.storage_time_ns:g} ns: fidelity {r.fidelity:.4f}, W_min {r.summary.w_min:+.4f}")
    logger.info("Outputs written to outputs/demo")


def main():
    rho = demo_preparation()
    stored = demo_storage(rho)
    demo_witness(stored)
    demo_decomposition(stored)
    demo_pipeline()


if __name__ == "__main__":
    try:
        main()
    except Exception as e:
        print(f"Error running demo: {str(e)}")
