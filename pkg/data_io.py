"""
File formats

- density matrix: JSON object {dim, re, im}, row-major, round-trip float precision
- MLE diagnostics: JSON object {iterations, log_likelihood, converged, history}
- samples: text, header ``# theta_rad,x``, one ``theta,x`` record per line (%.17g)
- Wigner grid: header ``# x_min x_max p_min p_max step``, a second comment line
  with those values, then one row of W per p value
- witness curve: text, header ``# gamma,zeta_opt,delta``
- traces: ``t_ns,value`` text per trace, or the binary block format
  (16-byte header: magic b"QMTR", version, n_traces, n_bins as little-endian
  uint32; then n_bins float64 times and n_traces x n_bins float64 values)
- summary table and run manifest
"""

import json
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from analysis import StateSummary, WignerGrid, WitnessCurve
from errors import InvalidStateError, OutputIOError
from fock_core import DensityMatrix
from homodyne import SampleSet, TraceSet
from tomography import MleResult

PathLike = Union[str, Path]

TRACE_MAGIC = b"QMTR"
TRACE_VERSION = 1
TRACE_HEADER = np.dtype([
    ("magic", "S4"),
    ("version", "<u4"),
    ("n_traces", "<u4"),
    ("n_bins", "<u4"),
])


class DensityMatrixRecord(BaseModel):
    dim: int
    re: List[float]
    im: List[float]


class MleDiagnosticsRecord(BaseModel):
    iterations: int
    log_likelihood: float
    converged: bool
    history: List[float]


def _write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise OutputIOError(f"Cannot write {path}: {e}") from e
    return path


def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise OutputIOError(f"Cannot read {path}: {e}") from e


def _save_table(path: PathLike, table: np.ndarray, header: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header=header, comments="# ")
    except OSError as e:
        raise OutputIOError(f"Cannot write {path}: {e}") from e
    return path


def _load_table(path: PathLike, columns: int) -> np.ndarray:
    try:
        table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except OSError as e:
        raise OutputIOError(f"Cannot read {path}: {e}") from e
    except ValueError as e:
        raise OutputIOError(f"Malformed table in {path}: {e}") from e
    if table.size == 0:
        return np.empty((0, columns))
    if table.shape[1] != columns:
        raise OutputIOError(f"{path}: expected {columns} columns, found {table.shape[1]}")
    return table


# ---------------------------------------------------------------------------
# Density matrices and reconstruction diagnostics
# ---------------------------------------------------------------------------

def density_matrix_to_json(rho: DensityMatrix) -> str:
    return DensityMatrixRecord(**rho.to_record()).model_dump_json(indent=2)


def density_matrix_from_json(text: str) -> DensityMatrix:
    try:
        record = DensityMatrixRecord.model_validate_json(text)
    except ValidationError as e:
        raise InvalidStateError(f"Malformed density-matrix record: {e.errors()[0]['msg']}") from e
    return DensityMatrix.from_record(record.model_dump())


def write_density_matrix(path: PathLike, rho: DensityMatrix) -> Path:
    return _write_text(path, density_matrix_to_json(rho))


def read_density_matrix(path: PathLike) -> DensityMatrix:
    return density_matrix_from_json(_read_text(path))


def write_mle_diagnostics(path: PathLike, result: MleResult) -> Path:
    record = MleDiagnosticsRecord(**result.diagnostics())
    return _write_text(path, record.model_dump_json(indent=2))


# ---------------------------------------------------------------------------
# Samples, grids, curves
# ---------------------------------------------------------------------------

def write_samples(path: PathLike, samples: SampleSet) -> Path:
    return _save_table(path, np.column_stack([samples.theta, samples.x]), "theta_rad,x")


def read_samples(path: PathLike) -> SampleSet:
    table = _load_table(path, 2)
    return SampleSet(table[:, 0], table[:, 1])


def write_wigner_grid(path: PathLike, grid: WignerGrid) -> Path:
    (x_min, x_max), (p_min, p_max) = grid.x_range, grid.p_range
    header = "x_min x_max p_min p_max step\n" + " ".join(
        f"{v:.17g}" for v in (x_min, x_max, p_min, p_max, grid.step))
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, grid.values, fmt="%.17g", delimiter=" ", header=header, comments="# ")
    except OSError as e:
        raise OutputIOError(f"Cannot write {path}: {e}") from e
    return path


def read_wigner_grid(path: PathLike) -> WignerGrid:
    lines = _read_text(path).splitlines()
    if len(lines) < 3 or not lines[1].startswith("#"):
        raise OutputIOError(f"{path}: missing Wigner grid header")
    x_min, x_max, p_min, p_max, step = (float(v) for v in lines[1].lstrip("# ").split())
    values = np.loadtxt(lines[2:], ndmin=2)
    xs = x_min + step * np.arange(values.shape[1])
    ps = p_min + step * np.arange(values.shape[0])
    if not (np.isclose(xs[-1], x_max) and np.isclose(ps[-1], p_max)):
        raise OutputIOError(f"{path}: grid shape does not match its header ranges")
    return WignerGrid(xs, ps, step, values)


def write_witness_curve(path: PathLike, curve: WitnessCurve) -> Path:
    table = np.array([[pt.gamma, pt.zeta_opt, pt.delta] for pt in curve.points])
    return _save_table(path, table, "gamma,zeta_opt,delta")


def read_witness_curve(path: PathLike) -> np.ndarray:
    return _load_table(path, 3)


def write_summary_table(path: PathLike, rows: Sequence[StateSummary]) -> Path:
    table = np.array([row.as_row() for row in rows]) if rows else np.empty((0, len(StateSummary.header())))
    return _save_table(path, table, ",".join(StateSummary.header()))


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

def write_traces_binary(path: PathLike, traces: TraceSet) -> Path:
    n_traces, n_bins = traces.values.shape
    header = np.array([(TRACE_MAGIC, TRACE_VERSION, n_traces, n_bins)], dtype=TRACE_HEADER)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(header.tobytes())
            fh.write(traces.times.astype("<f8").tobytes())
            fh.write(traces.values.astype("<f8").tobytes())
    except OSError as e:
        raise OutputIOError(f"Cannot write {path}: {e}") from e
    return path


def read_traces_binary(path: PathLike) -> TraceSet:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise OutputIOError(f"Cannot read {path}: {e}") from e
    if len(data) < TRACE_HEADER.itemsize:
        raise OutputIOError(f"{path}: truncated trace header")
    header = np.frombuffer(data[:TRACE_HEADER.itemsize], dtype=TRACE_HEADER)[0]
    if header["magic"] != TRACE_MAGIC:
        raise OutputIOError(f"{path}: not a trace file (magic {header['magic']!r})")
    if header["version"] != TRACE_VERSION:
        raise OutputIOError(f"{path}: unsupported trace format version {header['version']}")
    n_traces, n_bins = int(header["n_traces"]), int(header["n_bins"])
    body = np.frombuffer(data[TRACE_HEADER.itemsize:], dtype="<f8")
    if body.size != n_bins * (n_traces + 1):
        raise OutputIOError(f"{path}: expected {n_bins * (n_traces + 1)} values, found {body.size}")
    return TraceSet(body[:n_bins].copy(), body[n_bins:].reshape(n_traces, n_bins).copy())


def write_trace_text(path: PathLike, times: np.ndarray, values: np.ndarray) -> Path:
    return _save_table(path, np.column_stack([times, values]), "t_ns,value")


def read_trace_text(path: PathLike) -> np.ndarray:
    return _load_table(path, 2)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def package_versions() -> Dict[str, str]:
    versions = {}
    for name in ("numpy", "scipy", "pydantic"):
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def write_manifest(path: PathLike, manifest: Dict[str, Any]) -> Path:
    """Deterministic JSON (sorted keys, no timestamps) so reruns diff clean."""
    return _write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path: PathLike) -> Dict[str, Any]:
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise OutputIOError(f"{path}: malformed manifest ({e})") from e
