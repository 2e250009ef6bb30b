"""
Storage Experiment Orchestration

Runs the simulate -> reconstruct -> analyze workflow for every storage time
of an experiment configuration and writes one output directory per
storage time plus a summary table and a manifest.

Usage:
    experiment = StorageExperiment(load_experiment_config("run.cfg"))
    rows = experiment.run_pipeline()
"""

import threading
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import data_io
from analysis import (StateSummary, calibrate_initial_loss, corrected_delta_curve,
                      find_wigner_minimum, fit_half_life, gamma_scan,
                      qubit_subspace, summarize_state, wigner_grid,
                      wigner_minimum)
from config import SEED_LIMIT, ExperimentConfig, get_config, get_logger
from errors import ConfigError
from fock_core import DensityMatrix, fidelity, truncate
from homodyne import (SampleSet, exponential_envelope, extract_temporal_mode,
                      mode_overlap, mode_shift, sample_quadratures, shift_envelope,
                      simulate_traces, time_grid)
from memory_channel import MemoryParams, store
from preparation import (PreparationParams, herald_superposition,
                         heralded_single_photon, ideal_superposition)
from tomography import MleOptions, MleResult, mle_reconstruct


def derive_seed(seed: int, stage: str, *indices: int) -> int:
    """Seed for one stage/branch from (seed, crc32(stage), indices)."""
    sequence = np.random.SeedSequence([seed, zlib.crc32(stage.encode("utf-8")), *indices])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def default_workers() -> int:
    import psutil
    configured = get_config().max_workers
    if configured > 0:
        return configured
    return psutil.cpu_count(logical=False) or 1


def branch_name(t_ns: float) -> str:
    return f"t{t_ns:g}ns"


@dataclass
class BranchResult:
    """Per-storage-time outputs of the pipeline."""
    storage_time_ns: float
    true_state: DensityMatrix
    reconstruction: Optional[MleResult] = None
    summary: Optional[StateSummary] = None
    fidelity: Optional[float] = None
    files: List[str] = field(default_factory=list)


@dataclass
class CalibrationReport:
    initial_loss: float
    target_wmin: float
    predicted_wmin: Dict[float, float]
    reconstructed_wmin: Dict[float, float]
    minimum_angle: Dict[float, float]


class StorageExperiment:
    """
    Simulated storage experiment driven by an ExperimentConfig.

    Storage-time branches are independent and run on a thread pool; each
    branch draws its randomness from its own derived seed and writes into
    its own directory.
    """

    def __init__(self,
                 experiment: Optional[ExperimentConfig] = None,
                 output_dir: Optional[str] = None,
                 seed: Optional[int] = None,
                 dim: Optional[int] = None,
                 max_workers: Optional[int] = None):
        """
        Initialize the experiment.

        Args:
            experiment (ExperimentConfig): experiment description (defaults used when None)
            output_dir (str): overrides output.dir
            seed (int): overrides acquisition.seed
            dim (int): overrides acquisition.dim (simulation truncation)
            max_workers (int): thread-pool size; one per physical core by default
        """
        self.config = get_config()
        self.logger = get_logger()

        self.experiment = experiment or ExperimentConfig()
        self.output_dir = Path(output_dir or self.experiment.output.dir)
        if seed is not None and not 0 <= seed < SEED_LIMIT:
            raise ConfigError(f"seed must lie in [0, 2^64), got {seed}", key_path="acquisition.seed")
        self.seed = seed if seed is not None else self.experiment.acquisition.seed
        self.dim = dim if dim is not None else self.experiment.acquisition.dim
        self.max_workers = max_workers or default_workers()

        self.memory = MemoryParams.from_config(self.experiment.memory)
        if self.experiment.preparation is not None and self.memory.eta < 1.0:
            self.logger.warning(
                f"memory.eta = {self.memory.eta} is reported only; the heralded source applies "
                f"preparation.eta = {self.experiment.preparation.eta}")
        self.mle_options = MleOptions.from_config(self.experiment.analysis)
        self.phases = [float(np.deg2rad(p)) for p in self.experiment.acquisition.phases_deg]
        self.storage_times_ns = list(self.experiment.acquisition.storage_times_ns)

        # Statistics
        self._stats_lock = threading.Lock()
        self.branches_run = 0
        self.samples_drawn = 0

        self.logger.info(
            f"Storage experiment initialized: {len(self.storage_times_ns)} storage times, "
            f"{len(self.phases)} phases x {self.experiment.acquisition.n_per_phase}, seed={self.seed}")

    # ------------------------------------------------------------------
    # State source
    # ------------------------------------------------------------------

    def source_state(self) -> Tuple[DensityMatrix, float, float]:
        """
        Prepared state and its (alpha, beta) reference amplitudes.

        For a heralded source the references are taken from the fresh
        state's renormalized 0/1 block.
        """
        if self.experiment.preparation is not None:
            params = PreparationParams.from_config(self.experiment.preparation)
            state = herald_superposition(params, self.dim).state
            block, _ = qubit_subspace(state)
            alpha, beta = np.sqrt(block[0, 0].real), np.sqrt(block[1, 1].real)
            norm = np.hypot(alpha, beta)
            return state, float(alpha / norm), float(beta / norm)
        ideal = self.experiment.ideal
        state = ideal_superposition(ideal.alpha, ideal.beta, float(np.deg2rad(ideal.theta_deg)), self.dim)
        return state, ideal.alpha, ideal.beta

    @property
    def channel(self) -> MemoryParams:
        """Memory as applied by store(); a heralded source already carries its fake-click admixture."""
        if self.experiment.preparation is not None:
            return replace(self.memory, eta=1.0)
        return self.memory

    def stored_state(self, t_ns: float, source: Optional[DensityMatrix] = None,
                     channel: Optional[MemoryParams] = None) -> DensityMatrix:
        if source is None:
            source = self.source_state()[0]
        return store(source, channel or self.channel, t_ns * 1e-9)

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    def sample_branch(self, index: int, t_ns: float, source: DensityMatrix,
                      channel: Optional[MemoryParams] = None) -> Tuple[DensityMatrix, SampleSet, Path]:
        """Store, sample and write the samples file for one storage time."""
        state = self.stored_state(t_ns, source, channel)
        samples = sample_quadratures(state, self.phases, self.experiment.acquisition.n_per_phase,
                                     derive_seed(self.seed, "sample", index))
        path = data_io.write_samples(self.output_dir / branch_name(t_ns) / "samples.csv", samples)
        with self._stats_lock:
            self.samples_drawn += len(samples)
        self.logger.info(f"[{branch_name(t_ns)}] wrote {len(samples)} samples")
        return state, samples, path

    def reconstruct(self, samples: SampleSet) -> MleResult:
        return mle_reconstruct(samples, self.mle_options)

    def analyze(self, t_ns: float, rho: DensityMatrix, alpha: float, beta: float) -> Tuple[StateSummary, List[Path]]:
        """Wigner grid, minimum, witness scan and decomposition of one reconstructed state."""
        analysis = self.experiment.analysis
        directory = self.output_dir / branch_name(t_ns)
        bounds = (analysis.grid_min, analysis.grid_max)
        grid = wigner_grid(rho, bounds, bounds, analysis.grid_step)
        minimum = find_wigner_minimum(grid)
        curve = corrected_delta_curve(rho, gamma_scan(analysis.gamma_max, analysis.gamma_step))
        summary = summarize_state(rho, alpha, beta, t_ns, minimum)
        files = [
            data_io.write_wigner_grid(directory / "wigner.txt", grid),
            data_io.write_witness_curve(directory / "witness.csv", curve),
        ]
        self.logger.info(
            f"[{branch_name(t_ns)}] W_min={summary.w_min:.4f} at ({summary.w_min_x:.2f}, {summary.w_min_p:.2f}), "
            f"Delta={summary.delta:.4f}, min corrected Delta={curve.min_delta:.4f}, "
            f"L={summary.loss:.3f}, sigma={np.degrees(summary.sigma):.1f} deg")
        return summary, files

    def run_branch(self, index: int, t_ns: float, analyze: bool = True) -> BranchResult:
        source, alpha, beta = self.source_state()
        state, samples, samples_path = self.sample_branch(index, t_ns, source)
        result = BranchResult(t_ns, state, files=[str(samples_path)])
        if analyze:
            directory = self.output_dir / branch_name(t_ns)
            mle = self.reconstruct(samples)
            result.reconstruction = mle
            reference, _ = truncate(state, mle.state.dim)
            result.fidelity = fidelity(reference, mle.state)
            result.files.append(str(data_io.write_density_matrix(directory / "rho.json", mle.state)))
            result.files.append(str(data_io.write_mle_diagnostics(directory / "mle.json", mle)))
            result.summary, files = self.analyze(t_ns, mle.state, alpha, beta)
            result.files.extend(str(f) for f in files)
        with self._stats_lock:
            self.branches_run += 1
        return result

    def _run_branches(self, analyze: bool) -> List[BranchResult]:
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            futures = [pool.submit(self.run_branch, i, t, analyze) for i, t in enumerate(self.storage_times_ns)]
            return [f.result() for f in futures]

    # ------------------------------------------------------------------
    # Workflows
    # ------------------------------------------------------------------

    def run_simulation(self) -> List[BranchResult]:
        """prepare -> store -> sample for every storage time."""
        self.logger.info("Starting simulation")
        results = self._run_branches(analyze=False)
        self.write_manifest("simulate", results)
        return results

    def run_pipeline(self) -> List[BranchResult]:
        """Full simulate -> reconstruct -> analyze run with summary table."""
        self.logger.info("Starting pipeline")
        results = self._run_branches(analyze=True)
        data_io.write_summary_table(self.output_dir / "summary.csv", [r.summary for r in results])
        self.write_manifest("pipeline", results)
        for r in results:
            self.logger.info(f"[{branch_name(r.storage_time_ns)}] reconstruction fidelity {r.fidelity:.4f}")
        return results

    def run_calibration(self, target_wmin: float = -0.024, reconstruct: bool = True) -> CalibrationReport:
        """
        Fit the zero-time loss to a target Wigner minimum, then predict later times.

        Predictions hold the calibration fixed and add only the half-life
        decay and detuning rotation of the configured channel.
        """
        source, _, _ = self.source_state()
        initial_loss = calibrate_initial_loss(source, self.channel, target_wmin)
        self.memory = replace(self.memory, initial_loss=initial_loss)
        predicted, reconstructed, angles = {}, {}, {}
        for index, t_ns in enumerate(self.storage_times_ns):
            minimum = wigner_minimum(self.stored_state(t_ns, source), 2.0)
            predicted[t_ns] = minimum.value
            angles[t_ns] = float(np.arctan2(minimum.point.p, minimum.point.x))
            if reconstruct:
                _, samples, _ = self.sample_branch(index, t_ns, source)
                reconstructed[t_ns] = wigner_minimum(self.reconstruct(samples).state, 2.0).value
            self.logger.info(f"[{branch_name(t_ns)}] predicted W_min {predicted[t_ns]:.4f}"
                             + (f", reconstructed {reconstructed[t_ns]:.4f}" if reconstruct else ""))
        report = CalibrationReport(initial_loss, target_wmin, predicted, reconstructed, angles)
        data_io.write_manifest(self.output_dir / "calibration.json", {
            "initial_loss": initial_loss,
            "target_wmin": target_wmin,
            "predicted_wmin": {branch_name(t): v for t, v in predicted.items()},
            "reconstructed_wmin": {branch_name(t): v for t, v in reconstructed.items()},
            "minimum_angle_rad": {branch_name(t): v for t, v in angles.items()},
        })
        return report

    def run_decay(self, times_ns: Optional[List[float]] = None, lambda_: Optional[float] = None) -> Dict[str, Any]:
        """
        Single-photon storage run (displacement beam blocked) through tomography,
        with an exponential fit of the single-photon fraction.

        lambda_ and the herald efficiency default to the preparation section
        (0.1 and 1.0 without one); memory.eta is not applied on top.
        """
        times_ns = times_ns or [100.0 * k for k in range(5)]
        preparation = self.experiment.preparation
        if lambda_ is None:
            lambda_ = preparation.lambda_ if preparation else 0.1
        eta = preparation.eta if preparation else 1.0
        source = heralded_single_photon(lambda_, eta, self.dim).state
        channel = replace(self.memory, eta=1.0)
        fractions = []
        for index, t_ns in enumerate(times_ns):
            _, samples, _ = self.sample_branch(index, t_ns, source, channel)
            fractions.append(self.reconstruct(samples).state[1, 1].real)
        fit = fit_half_life(times_ns, fractions)
        self.logger.info(f"Fitted half-life {fit.half_life:.1f} ns (configured {self.memory.half_life * 1e9:.1f} ns)")
        report = {
            "lambda": lambda_,
            "times_ns": list(times_ns),
            "single_photon_fraction": fractions,
            "half_life_ns": fit.half_life,
            "half_life_std_ns": fit.half_life_std,
            "amplitude": fit.amplitude,
        }
        data_io.write_manifest(self.output_dir / "decay.json", report)
        return report

    def run_temporal_mode(self, n_traces: int = 5000, tau_ns: float = 50.0, t_release_ns: float = 100.0,
                          shift_ns: float = 0.0, step_ns: Optional[float] = None,
                          window_ns: Optional[float] = None) -> Dict[str, Any]:
        """Simulate single-photon traces and recover the envelope by PCA; the grid defaults to the settings."""
        step_ns = step_ns or self.config.trace_step_ns
        window_ns = window_ns or self.config.trace_window_ns
        times = time_grid(step_ns, window_ns)
        envelope = shift_envelope(exponential_envelope(times, t_release_ns, tau_ns), shift_ns)
        single = ideal_superposition(0.0, 1.0, 0.0, self.dim)
        x_values = sample_quadratures(single, [0.0], n_traces, derive_seed(self.seed, "trace-x")).x
        traces = simulate_traces(x_values, envelope, derive_seed(self.seed, "trace-noise"))
        extracted = extract_temporal_mode(traces)
        overlap = mode_overlap(envelope, extracted)
        data_io.write_traces_binary(self.output_dir / "traces.bin", traces)
        data_io.write_trace_text(self.output_dir / "temporal_mode.csv", extracted.times, extracted.weights)
        report = {
            "n_traces": n_traces,
            "overlap": overlap,
            "shift_ns": mode_shift(exponential_envelope(times, t_release_ns, tau_ns), extracted),
        }
        self.logger.info(f"Temporal mode overlap {overlap:.4f}")
        data_io.write_manifest(self.output_dir / "temporal_mode.json", report)
        return report

    # ------------------------------------------------------------------
    # Reporting
    # ------------------------------------------------------------------

    def manifest(self, command: str, results: List[BranchResult]) -> Dict[str, Any]:
        return {
            "command": command,
            "config": self.experiment.model_dump(mode="json", by_alias=True),
            "seed": self.seed,
            "dim": self.dim,
            "reconstruction_dim": self.mle_options.dim,
            "versions": data_io.package_versions(),
            "files": sorted(str(Path(f).relative_to(self.output_dir)) for r in results for f in r.files),
        }

    def write_manifest(self, command: str, results: List[BranchResult]) -> Path:
        return data_io.write_manifest(self.output_dir / "manifest.json", self.manifest(command, results))

    def get_statistics(self) -> Dict[str, Any]:
        return {
            "branches_run": self.branches_run,
            "samples_drawn": self.samples_drawn,
            "storage_times_ns": self.storage_times_ns,
            "output_dir": str(self.output_dir),
        }

