#!/usr/bin/env python3
"""
Command-line interface for the optical quantum memory simulator.

Usage:
  python cli.py simulate --config run.cfg --seed 7 --out outputs/run7
  python cli.py pipeline --config run.cfg
  python cli.py tomo --samples outputs/run7/t0ns/samples.csv --dim 10
  python cli.py wigner --state outputs/run7/t0ns/rho.json
  python cli.py witness --state rho.json
  python cli.py decompose --state rho.json --alpha 0.7071 --beta 0.7071
  python cli.py temporal-mode --traces 5000
  python cli.py calibrate --target -0.024
  python cli.py decay

Exit codes: 0 success, 2 configuration error, 3 numeric/convergence error,
4 I/O error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

import data_io
from analysis import (corrected_delta_curve, estimate_loss_dephasing,
                      find_wigner_minimum, gamma_scan, nongaussianity_delta,
                      qubit_subspace, wigner_grid)
from config import ExperimentConfig, get_logger, load_experiment_config, set_log_level
from errors import OutputIOError, SimulatorError
from storage_experiment import StorageExperiment
from tomography import MleOptions, mle_reconstruct


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="Dotted-key experiment config file")
    common.add_argument("--seed", type=int, default=None, help="Override acquisition.seed")
    common.add_argument("--out", type=str, default=None, help="Output directory (overrides output.dir)")
    common.add_argument("--dim", type=int, default=None, help="Fock truncation for the command")
    common.add_argument("--log-level", type=str, default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Console log level")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        description="Simulate, reconstruct and analyze stored optical qubit states",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Usage:", 1)[1],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="prepare -> store -> sample per storage time")
    sub.add_parser("pipeline", parents=[common], help="simulate, reconstruct and analyze")

    tomo = sub.add_parser("tomo", parents=[common], help="reconstruct a density matrix from samples")
    tomo.add_argument("--samples", type=str, required=True, help="theta_rad,x samples file")

    for name, text in (("wigner", "Wigner grid and minimum"),
                       ("witness", "Gaussian-corrected non-Gaussianity scan"),
                       ("decompose", "loss and dephasing estimate")):
        cmd = sub.add_parser(name, parents=[common], help=text)
        cmd.add_argument("--state", type=str, required=True, help="density matrix JSON file")
        if name == "decompose":
            cmd.add_argument("--alpha", type=float, default=None, help="vacuum amplitude of the ideal state")
            cmd.add_argument("--beta", type=float, default=None, help="single-photon amplitude of the ideal state")

    mode = sub.add_parser("temporal-mode", parents=[common], help="PCA temporal-mode extraction")
    mode.add_argument("--traces", type=int, default=5000, help="number of simulated traces")
    mode.add_argument("--tau", type=float, default=50.0, help="envelope decay time (ns)")
    mode.add_argument("--release", type=float, default=100.0, help="release time (ns)")
    mode.add_argument("--shift", type=float, default=0.0, help="storage-time shift of the envelope (ns)")
    mode.add_argument("--step", type=float, default=None, help="trace grid step (ns); default from settings")
    mode.add_argument("--window", type=float, default=None, help="trace window (ns); default from settings")

    calibrate = sub.add_parser("calibrate", parents=[common], help="fit zero-time loss and predict later minima")
    calibrate.add_argument("--target", type=float, default=-0.024, help="target Wigner minimum at t=0")
    calibrate.add_argument("--no-reconstruct", action="store_true", help="skip the tomography loop")

    decay = sub.add_parser("decay", parents=[common], help="single-photon decay and half-life fit")
    decay.add_argument("--lambda", dest="lambda_", type=float, default=None,
                       help="source lambda (default: preparation.lambda, else 0.1)")
    decay.add_argument("--step", type=float, default=100.0, help="storage-time step (ns)")
    decay.add_argument("--points", type=int, default=5, help="number of storage times")
    return parser


def _out_dir(args, experiment: ExperimentConfig) -> Path:
    return Path(args.out or experiment.output.dir)


def _finite(value: float) -> Optional[float]:
    return value if np.isfinite(value) else None


def _experiment(args) -> StorageExperiment:
    experiment = load_experiment_config(args.config)
    return StorageExperiment(experiment, output_dir=args.out, seed=args.seed, dim=args.dim)


def cmd_simulate(args) -> int:
    results = _experiment(args).run_simulation()
    for r in results:
        print(f"t={r.storage_time_ns:g} ns: {r.files[0]}")
    return 0


def cmd_pipeline(args) -> int:
    results = _experiment(args).run_pipeline()
    print("t_ns    rho11    |rho01|  arg(rho01)  W_min     Delta     L       sigma_deg  fidelity")
    for r in results:
        s = r.summary
        print(f"{s.storage_time_ns:<7g} {s.rho11:.4f}   {s.abs_rho01:.4f}   {s.arg_rho01:+.4f}    "
              f"{s.w_min:+.4f}   {s.delta:+.4f}   {s.loss:.3f}   {np.degrees(s.sigma):6.2f}     {r.fidelity:.4f}")
    return 0


def cmd_tomo(args) -> int:
    experiment = load_experiment_config(args.config)
    options = MleOptions.from_config(experiment.analysis, dim=args.dim)
    result = mle_reconstruct(data_io.read_samples(args.samples), options)
    out = _out_dir(args, experiment)
    data_io.write_density_matrix(out / "rho.json", result.state)
    data_io.write_mle_diagnostics(out / "mle.json", result)
    print(f"{result.iterations} iterations, log-likelihood {result.log_likelihood:.6f}, "
          f"converged={result.converged}")
    return 0


def cmd_wigner(args) -> int:
    experiment = load_experiment_config(args.config)
    rho = data_io.read_density_matrix(args.state)
    a = experiment.analysis
    grid = wigner_grid(rho, (a.grid_min, a.grid_max), (a.grid_min, a.grid_max), a.grid_step)
    minimum = find_wigner_minimum(grid)
    data_io.write_wigner_grid(_out_dir(args, experiment) / "wigner.txt", grid)
    print(f"W_min = {minimum.value:.5f} at ({minimum.point.x:.3f}, {minimum.point.p:.3f}); "
          f"integral {grid.integral:.5f}")
    return 0


def cmd_witness(args) -> int:
    experiment = load_experiment_config(args.config)
    rho = data_io.read_density_matrix(args.state)
    curve = corrected_delta_curve(rho, gamma_scan(experiment.analysis.gamma_max, experiment.analysis.gamma_step),
                                  dim=args.dim)
    data_io.write_witness_curve(_out_dir(args, experiment) / "witness.csv", curve)
    print(f"Delta = {nongaussianity_delta(rho):.5f}; corrected minimum {curve.min_delta:.5f} "
          f"at gamma = {curve.argmin_gamma:.3f} (phi = {curve.phi:.4f})")
    return 0


def cmd_decompose(args) -> int:
    experiment = load_experiment_config(args.config)
    rho = data_io.read_density_matrix(args.state)
    alpha = args.alpha if args.alpha is not None else experiment.ideal.alpha if experiment.ideal else None
    beta = args.beta if args.beta is not None else experiment.ideal.beta if experiment.ideal else None
    if alpha is None or beta is None:
        alpha, beta = np.sqrt(0.5), np.sqrt(0.5)
    result = estimate_loss_dephasing(rho, alpha, beta)
    _, discarded = qubit_subspace(rho)
    print(json.dumps({
        "loss": result.loss,
        "sigma_rad": _finite(result.sigma),
        "sigma_deg": _finite(float(np.degrees(result.sigma))),
        "sigma_infinite": result.sigma_infinite,
        "renorm_weight": result.renorm_weight,
        "discarded_weight": discarded,
        "loss_clamped": result.loss_clamped,
        "over_coherent": result.over_coherent,
    }, indent=2, allow_nan=False))
    return 0


def cmd_temporal_mode(args) -> int:
    report = _experiment(args).run_temporal_mode(args.traces, args.tau, args.release, args.shift,
                                                 args.step, args.window)
    print(f"overlap {report['overlap']:.4f}, shift {report['shift_ns']:g} ns")
    return 0


def cmd_calibrate(args) -> int:
    report = _experiment(args).run_calibration(args.target, reconstruct=not args.no_reconstruct)
    print(f"L0 = {report.initial_loss:.4f}")
    for t_ns, value in report.predicted_wmin.items():
        line = f"t={t_ns:g} ns: predicted W_min {value:+.4f}, angle {np.degrees(report.minimum_angle[t_ns]):.1f} deg"
        if t_ns in report.reconstructed_wmin:
            line += f", reconstructed {report.reconstructed_wmin[t_ns]:+.4f}"
        print(line)
    return 0


def cmd_decay(args) -> int:
    times = [args.step * k for k in range(args.points)]
    report = _experiment(args).run_decay(times, args.lambda_)
    print(f"half-life {report['half_life_ns']:.1f} +/- {report['half_life_std_ns']:.1f} ns")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "pipeline": cmd_pipeline,
    "tomo": cmd_tomo,
    "wigner": cmd_wigner,
    "witness": cmd_witness,
    "decompose": cmd_decompose,
    "temporal-mode": cmd_temporal_mode,
    "calibrate": cmd_calibrate,
    "decay": cmd_decay,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger = get_logger()
    if args.log_level:
        set_log_level(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except SimulatorError as e:
        logger.error(f"{args.command}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command}: {OutputIOError(str(e))}")
        return OutputIOError.exit_code


if __name__ == "__main__":
    sys.exit(main())
