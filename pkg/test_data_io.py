import json

import numpy as np
import pytest

import data_io
from analysis import (StateSummary, WitnessCurve, WitnessPoint, wigner_grid)
from errors import InvalidStateError, OutputIOError
from fock_core import DensityMatrix, coherent_state
from homodyne import (SampleSet, TraceSet, exponential_envelope,
                      sample_quadratures, simulate_traces, time_grid)
from tomography import MleResult


def test_density_matrix_round_trip(tmp_path, balanced):
    rho = DensityMatrix.from_unnormalized(0.6 * balanced.matrix + 0.4 * coherent_state(0.3j, 10).matrix)
    path = data_io.write_density_matrix(tmp_path / "state" / "rho.json", rho)
    restored = data_io.read_density_matrix(path)
    assert np.array_equal(restored.matrix, rho.matrix)
    record = json.loads(path.read_text())
    assert record["dim"] == 10
    assert len(record["re"]) == len(record["im"]) == 100


@pytest.mark.parametrize("text", [
    '{"dim": 2}',
    '{"dim": 2, "re": [1, 0, 0], "im": [0, 0, 0, 0]}',
    '{"dim": 2, "re": [0.5, 0.5, 0.0, 0.5], "im": [0, 0, 0, 0]}',
])
def test_malformed_density_matrix_records(text):
    with pytest.raises(InvalidStateError):
        data_io.density_matrix_from_json(text)


def test_mle_diagnostics(tmp_path, balanced):
    result = MleResult(balanced, iterations=3, log_likelihood=-12.5, converged=False,
                       history=[-20.0, -15.0, -12.5])
    path = data_io.write_mle_diagnostics(tmp_path / "mle.json", result)
    assert json.loads(path.read_text()) == {
        "iterations": 3, "log_likelihood": -12.5, "converged": False, "history": [-20.0, -15.0, -12.5]}


def test_samples_round_trip(tmp_path, balanced):
    samples = sample_quadratures(balanced, [0.0, 1.0, 2.5], 200, seed=1)
    path = data_io.write_samples(tmp_path / "samples.csv", samples)
    assert path.read_text().startswith("# theta_rad,x\n")
    restored = data_io.read_samples(path)
    assert np.array_equal(restored.theta, samples.theta)
    assert np.array_equal(restored.x, samples.x)


def test_wigner_grid_round_trip(tmp_path, balanced):
    grid = wigner_grid(balanced, (-1.0, 1.0), (-0.5, 0.5), 0.25)
    path = data_io.write_wigner_grid(tmp_path / "wigner.txt", grid)
    lines = path.read_text().splitlines()
    assert lines[0] == "# x_min x_max p_min p_max step"
    assert len(lines) == 2 + grid.p.size
    restored = data_io.read_wigner_grid(path)
    assert np.array_equal(restored.values, grid.values)
    assert np.allclose(restored.x, grid.x)
    assert np.allclose(restored.p, grid.p)
    assert restored.step == grid.step


def test_wigner_grid_without_header(tmp_path):
    path = tmp_path / "bare.txt"
    path.write_text("0.1 0.2\n0.3 0.4\n")
    with pytest.raises(OutputIOError):
        data_io.read_wigner_grid(path)


def test_witness_curve_round_trip(tmp_path):
    curve = WitnessCurve([WitnessPoint(0.0, 0.0, 3.1, -0.02), WitnessPoint(0.25, 0.1, 3.1, -0.05)], phi=3.1)
    path = data_io.write_witness_curve(tmp_path / "witness.csv", curve)
    table = data_io.read_witness_curve(path)
    assert np.array_equal(table, [[0.0, 0.0, -0.02], [0.25, 0.1, -0.05]])


def test_summary_table(tmp_path):
    row = StateSummary(200.0, 0.4, 0.3, 0.377, -0.05, -0.4, 0.15, -0.02, 0.1, 0.2)
    path = data_io.write_summary_table(tmp_path / "summary.csv", [row, row])
    assert path.read_text().splitlines()[0] == "# " + ",".join(StateSummary.header())
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    assert table.shape == (2, 10)
    assert np.array_equal(table[0], row.as_row())


def test_traces_binary_round_trip(tmp_path, balanced):
    grid = time_grid(10.0, 200.0)
    x = sample_quadratures(balanced, [0.0], 25, seed=2).x
    traces = simulate_traces(x, exponential_envelope(grid, 20.0, 30.0), noise_seed=3)
    path = data_io.write_traces_binary(tmp_path / "traces.bin", traces)
    raw = path.read_bytes()
    assert raw[:4] == b"QMTR"
    assert len(raw) == 16 + 8 * grid.size * (len(traces) + 1)
    restored = data_io.read_traces_binary(path)
    assert np.array_equal(restored.times, traces.times)
    assert np.array_equal(restored.values, traces.values)


def test_traces_binary_rejects_foreign_files(tmp_path):
    traces = TraceSet(time_grid(10.0, 50.0), np.zeros((2, 5)))
    path = data_io.write_traces_binary(tmp_path / "traces.bin", traces)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(OutputIOError):
        data_io.read_traces_binary(path)
    path.write_bytes(b"QMTR")
    with pytest.raises(OutputIOError):
        data_io.read_traces_binary(path)


def test_traces_binary_rejects_truncated_body(tmp_path):
    traces = TraceSet(time_grid(10.0, 50.0), np.ones((3, 5)))
    path = data_io.write_traces_binary(tmp_path / "traces.bin", traces)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(OutputIOError):
        data_io.read_traces_binary(path)


def test_trace_text(tmp_path):
    times = time_grid(10.0, 50.0)
    values = np.array([0.1, -0.2, 0.3, 0.0, 1.5])
    path = data_io.write_trace_text(tmp_path / "mode.csv", times, values)
    assert np.array_equal(data_io.read_trace_text(path), np.column_stack([times, values]))


def test_manifest_is_deterministic(tmp_path):
    manifest = {"seed": 7, "files": ["b", "a"], "config": {"z": 1, "a": 2}}
    first = data_io.write_manifest(tmp_path / "one.json", manifest).read_bytes()
    second = data_io.write_manifest(tmp_path / "two.json", dict(reversed(list(manifest.items())))).read_bytes()
    assert first == second
    assert list(data_io.read_manifest(tmp_path / "one.json")) == ["config", "files", "seed"]
    assert set(data_io.package_versions()) == {"numpy", "scipy", "pydantic"}


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(OutputIOError):
        data_io.read_density_matrix(tmp_path / "absent.json")
    with pytest.raises(OutputIOError):
        data_io.read_samples(tmp_path / "absent.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("# theta_rad,x\n0.1,0.2,0.3\n")
    with pytest.raises(OutputIOError):
        data_io.read_samples(bad)
    bad.write_text("{not json")
    with pytest.raises(OutputIOError):
        data_io.read_manifest(bad)


def test_unwritable_target(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OutputIOError):
        data_io.write_samples(blocker / "samples.csv", SampleSet([0.0], [0.0]))
