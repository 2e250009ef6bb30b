"""
Quantum Memory Simulator - FastAPI Application

REST API over the simulator: prepare and store states, evaluate Wigner
functions and the non-Gaussianity witness, decompose loss and dephasing,
reconstruct density matrices from uploaded homodyne samples and run full
storage pipelines whose output files can be listed and downloaded.
"""

import platform
import re
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import uvicorn
from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field

project_root = Path(__file__).parent
sys.path.append(str(project_root))

import data_io
from analysis import (corrected_delta_curve, estimate_loss_dephasing,
                      find_wigner_minimum, gamma_scan, nongaussianity_delta,
                      qubit_subspace, summarize_state, wigner_grid)
from config import (IdealStateConfig, MemoryConfig, PreparationConfig,
                    build_experiment_config, get_config, get_logger,
                    parse_dotted)
from data_io import DensityMatrixRecord
from errors import ConfigError, SimulatorError
from fock_core import DensityMatrix, mean_photon_number, purity, truncate
from memory_channel import MemoryParams, store
from preparation import PreparationParams, herald_superposition, ideal_superposition
from storage_experiment import StorageExperiment
from tomography import Binning, MleOptions, mle_reconstruct

config = get_config()
logger = get_logger()

VERSION = "1.0.0"
RUNS_ROOT = Path(config.output_dir) / "runs"
UPLOADS_ROOT = project_root / "uploads"
RUN_NAME = re.compile(r"^[A-Za-z0-9_-]{1,64}$")

app = FastAPI(
    title="Quantum Memory Simulator",
    description="Heralded optical qubits through a noisy memory, homodyne tomography and phase-space analysis",
    version=VERSION,
    docs_url="/api/docs",
    redoc_url="/api/redoc"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Pydantic models for request/response validation
class APIResponse(BaseModel):
    """Standard API response model."""
    success: bool
    message: str
    data: Optional[Dict[str, Any]] = None
    error: Optional[str] = None
    timestamp: str = Field(default_factory=lambda: datetime.now().isoformat())


class StateRequest(BaseModel):
    """Prepare a state, optionally pass it through the memory."""
    ideal: Optional[IdealStateConfig] = None
    preparation: Optional[PreparationConfig] = None
    memory: Optional[MemoryConfig] = None
    storage_time_ns: float = Field(0.0, ge=0.0)
    dim: Optional[int] = Field(None, ge=2, description="Simulation truncation")
    report_dim: Optional[int] = Field(None, ge=2, description="Truncation of the returned matrix")


class StateAnalysisRequest(BaseModel):
    state: DensityMatrixRecord


class WignerRequest(StateAnalysisRequest):
    x_min: float = -3.0
    x_max: float = 3.0
    p_min: float = -3.0
    p_max: float = 3.0
    step: float = Field(0.05, gt=0.0)
    include_grid: bool = Field(False, description="Return the full grid values")


class WitnessRequest(StateAnalysisRequest):
    gamma_max: float = Field(1.5, ge=0.0)
    gamma_step: float = Field(0.05, gt=0.0)
    dim: Optional[int] = Field(None, ge=2, description="Working truncation of the scan")


class DecomposeRequest(StateAnalysisRequest):
    alpha: float = 0.7071067811865476
    beta: float = 0.7071067811865476


class SimulateRequest(BaseModel):
    """Run a storage experiment into RUNS_ROOT/<name>."""
    name: str = Field(..., description="Run directory name")
    config_text: Optional[str] = Field(None, description="Dotted-key experiment file contents")
    overrides: Dict[str, Dict[str, Any]] = Field(default_factory=dict, description="section -> key -> value")
    seed: Optional[int] = None
    dim: Optional[int] = Field(None, ge=2)
    reconstruct: bool = Field(True, description="Run tomography and analysis after sampling")


def _finite(value: float) -> Optional[float]:
    """JSON has no inf/nan."""
    value = float(value)
    return value if np.isfinite(value) else None


def _state(record: DensityMatrixRecord) -> DensityMatrix:
    return DensityMatrix.from_record(record.model_dump())


def _run_dir(name: str) -> Path:
    if not RUN_NAME.match(name):
        raise HTTPException(status_code=400, detail=f"Invalid run name: {name!r}")
    return RUNS_ROOT / name


# Root endpoint
@app.get("/", response_model=APIResponse)
async def root():
    """API info."""
    return APIResponse(
        success=True,
        message="Quantum Memory Simulator API is running",
        data={
            "version": VERSION,
            "docs": "/api/docs",
            "status": "healthy",
            "endpoints": {
                "health": "/api/health",
                "state": "/api/state",
                "wigner": "/api/wigner",
                "witness": "/api/witness",
                "decompose": "/api/decompose",
                "tomography": "/api/tomography",
                "simulate": "/api/simulate",
                "runs": "/api/runs"
            }
        }
    )


# Health check endpoint
@app.get("/api/health", response_model=APIResponse)
async def health_check():
    """Check that output directories are usable."""
    directories_status = {
        "outputs": Path(config.output_dir).exists(),
        "runs": RUNS_ROOT.exists(),
        "uploads": UPLOADS_ROOT.exists(),
        "logs": (project_root / "logs").exists()
    }
    return APIResponse(
        success=True,
        message="Health check completed",
        data={
            "status": "healthy",
            "directories": directories_status,
            "versions": data_io.package_versions()
        }
    )


# Configuration endpoint
@app.get("/api/config", response_model=APIResponse)
async def get_configuration():
    """Current process settings."""
    return APIResponse(
        success=True,
        message="Configuration retrieved successfully",
        data=config.model_dump()
    )


# System information endpoint
@app.get("/api/system-info", response_model=APIResponse)
async def get_system_info():
    """Get system information and statistics."""
    try:
        import psutil

        disk_usage = psutil.disk_usage(str(project_root))
        system_info = {
            "platform": platform.system(),
            "python_version": platform.python_version(),
            "cpu_count": psutil.cpu_count(),
            "physical_cores": psutil.cpu_count(logical=False),
            "memory_total_gb": round(psutil.virtual_memory().total / (1024**3), 2),
            "disk_usage": {
                "total_gb": round(disk_usage.total / (1024**3), 2),
                "used_gb": round(disk_usage.used / (1024**3), 2),
                "free_gb": round(disk_usage.free / (1024**3), 2)
            },
            "runs": len([p for p in RUNS_ROOT.iterdir() if p.is_dir()]) if RUNS_ROOT.exists() else 0
        }
        return APIResponse(
            success=True,
            message="System information retrieved successfully",
            data=system_info
        )
    except Exception as e:
        logger.error(f"System info error: {e}")
        return APIResponse(
            success=False,
            message="Failed to retrieve system information",
            error=str(e)
        )


# State preparation endpoint
@app.post("/api/state", response_model=APIResponse)
def prepare_state(request: StateRequest):
    """Prepare an ideal or heralded state and store it for storage_time_ns."""
    if request.ideal is not None and request.preparation is not None:
        raise ConfigError("give either ideal or preparation, not both")
    dim = request.dim or config.compute_dim
    report_dim = request.report_dim or config.report_dim
    click_probability = None

    if request.preparation is not None:
        herald = herald_superposition(PreparationParams.from_config(request.preparation), dim)
        state, click_probability = herald.state, herald.click_probability
        block, _ = qubit_subspace(state)
        alpha, beta = np.sqrt(block[0, 0].real), np.sqrt(block[1, 1].real)
        norm = np.hypot(alpha, beta)
        alpha, beta = alpha / norm, beta / norm
    else:
        ideal = request.ideal or IdealStateConfig()
        state = ideal_superposition(ideal.alpha, ideal.beta, float(np.deg2rad(ideal.theta_deg)), dim)
        alpha, beta = ideal.alpha, ideal.beta

    if request.memory is not None:
        state = store(state, MemoryParams.from_config(request.memory), request.storage_time_ns * 1e-9)

    reported, discarded = truncate(state, min(report_dim, state.dim))
    try:
        summary = summarize_state(state, float(alpha), float(beta), request.storage_time_ns)
        summary_data = {k: _finite(v) for k, v in zip(summary.header(), summary.as_row())}
    except SimulatorError as e:
        logger.warning(f"No summary for prepared state: {e}")
        summary_data = None
    logger.info(f"Prepared state: dim={dim}, t={request.storage_time_ns:g} ns")
    return APIResponse(
        success=True,
        message="State prepared successfully",
        data={
            "state": reported.to_record(),
            "discarded_weight": discarded,
            "click_probability": click_probability,
            "mean_photon_number": mean_photon_number(state),
            "purity": purity(state),
            "summary": summary_data
        }
    )


# Wigner function endpoint
@app.post("/api/wigner", response_model=APIResponse)
def compute_wigner(request: WignerRequest):
    """Wigner grid minimum and normalization for a density matrix."""
    rho = _state(request.state)
    grid = wigner_grid(rho, (request.x_min, request.x_max), (request.p_min, request.p_max), request.step)
    minimum = find_wigner_minimum(grid)
    data = {
        "minimum": {
            "x": minimum.point.x,
            "p": minimum.point.p,
            "value": minimum.value,
            "on_boundary": minimum.on_boundary
        },
        "integral": grid.integral,
        "shape": list(grid.values.shape)
    }
    if request.include_grid:
        data["x"] = grid.x.tolist()
        data["p"] = grid.p.tolist()
        data["values"] = grid.values.tolist()
    return APIResponse(success=True, message="Wigner function computed", data=data)


# Witness endpoint
@app.post("/api/witness", response_model=APIResponse)
def compute_witness(request: WitnessRequest):
    """Witness value and its Gaussian-corrected scan."""
    rho = _state(request.state)
    curve = corrected_delta_curve(rho, gamma_scan(request.gamma_max, request.gamma_step), dim=request.dim)
    return APIResponse(
        success=True,
        message="Witness scan completed",
        data={
            "delta": nongaussianity_delta(rho),
            "phi": curve.phi,
            "dip_defined": curve.dip_defined,
            "min_delta": curve.min_delta,
            "argmin_gamma": curve.argmin_gamma,
            "enters_negative": curve.enters_negative,
            "curve": [{"gamma": pt.gamma, "zeta_opt": pt.zeta_opt, "delta": pt.delta} for pt in curve.points]
        }
    )


# Decomposition endpoint
@app.post("/api/decompose", response_model=APIResponse)
def decompose_state(request: DecomposeRequest):
    """Loss and dephasing estimate against the ideal alpha, beta."""
    rho = _state(request.state)
    result = estimate_loss_dephasing(rho, request.alpha, request.beta)
    return APIResponse(
        success=True,
        message="Decomposition completed",
        data={
            "loss": result.loss,
            "sigma_rad": _finite(result.sigma),
            "sigma_infinite": result.sigma_infinite,
            "renorm_weight": result.renorm_weight,
            "loss_clamped": result.loss_clamped,
            "over_coherent": result.over_coherent
        }
    )


# Tomography endpoint
@app.post("/api/tomography", response_model=APIResponse)
async def reconstruct_state(file: UploadFile = File(...), dim: int = Form(10),
                            binning: str = Form("per_sample")):
    """Reconstruct a density matrix from an uploaded theta_rad,x samples file."""
    if not file.filename:
        raise HTTPException(status_code=400, detail="No samples file provided")
    if binning not in {b.value for b in Binning}:
        raise HTTPException(status_code=400, detail=f"Unknown binning: {binning!r}")
    UPLOADS_ROOT.mkdir(exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")
    upload_path = UPLOADS_ROOT / f"{timestamp}_{Path(file.filename).name}"
    upload_path.write_bytes(await file.read())
    logger.info(f"Samples uploaded: {upload_path.name}")
    try:
        samples = data_io.read_samples(upload_path)
    finally:
        upload_path.unlink(missing_ok=True)

    result = mle_reconstruct(samples, MleOptions(dim=dim, binning=binning))
    return APIResponse(
        success=True,
        message="Reconstruction completed",
        data={
            "state": result.state.to_record(),
            "iterations": result.iterations,
            "log_likelihood": result.log_likelihood,
            "converged": result.converged,
            "n_samples": len(samples)
        }
    )


# Pipeline endpoint
@app.post("/api/simulate", response_model=APIResponse)
def run_simulation(request: SimulateRequest):
    """Simulate (and by default reconstruct and analyze) a storage experiment."""
    run_dir = _run_dir(request.name)
    tree = parse_dotted(request.config_text) if request.config_text else {}
    for section, values in request.overrides.items():
        tree.setdefault(section, {}).update(values)
    experiment = build_experiment_config(tree)
    runner = StorageExperiment(experiment, output_dir=str(run_dir), seed=request.seed, dim=request.dim)
    results = runner.run_pipeline() if request.reconstruct else runner.run_simulation()

    branches = []
    for r in results:
        branch: Dict[str, Any] = {"storage_time_ns": r.storage_time_ns}
        if r.summary is not None:
            branch["summary"] = {k: _finite(v) for k, v in zip(r.summary.header(), r.summary.as_row())}
            branch["fidelity"] = r.fidelity
        branches.append(branch)
    return APIResponse(
        success=True,
        message=f"Run {request.name} completed",
        data={
            "name": request.name,
            "branches": branches,
            "statistics": runner.get_statistics(),
            "files": runner.manifest("api", results)["files"]
        }
    )


# Run listing endpoints
@app.get("/api/runs", response_model=APIResponse)
async def list_runs():
    """List run directories with their files."""
    runs: List[Dict[str, Any]] = []
    if RUNS_ROOT.exists():
        for run_dir in sorted(p for p in RUNS_ROOT.iterdir() if p.is_dir()):
            files = sorted(str(f.relative_to(run_dir)) for f in run_dir.rglob("*") if f.is_file())
            runs.append({
                "name": run_dir.name,
                "files": files,
                "modified": datetime.fromtimestamp(run_dir.stat().st_mtime).isoformat()
            })
    return APIResponse(
        success=True,
        message=f"Found {len(runs)} runs",
        data={"runs": runs}
    )


@app.get("/api/runs/{name}/{file_path:path}")
async def download_run_file(name: str, file_path: str):
    """Download one output file of a run."""
    run_dir = _run_dir(name).resolve()
    target = (run_dir / file_path).resolve()
    if run_dir not in target.parents or not target.is_file():
        raise HTTPException(status_code=404, detail="File not found")
    return FileResponse(str(target), filename=target.name)


# Error handlers
@app.exception_handler(SimulatorError)
async def simulator_error_handler(request, exc: SimulatorError):
    status = 422 if isinstance(exc, ConfigError) else 400
    logger.warning(f"{request.url.path}: {type(exc).__name__}: {exc}")
    return JSONResponse(
        status_code=status,
        content=APIResponse(
            success=False,
            message=type(exc).__name__,
            error=str(exc)
        ).model_dump()
    )


@app.exception_handler(404)
async def not_found_handler(request, exc):
    return JSONResponse(
        status_code=404,
        content=APIResponse(
            success=False,
            message="Endpoint not found",
            error=getattr(exc, "detail", None) or "The requested resource was not found"
        ).model_dump()
    )


@app.exception_handler(500)
async def internal_error_handler(request, exc):
    logger.error(f"Internal server error: {exc}")
    return JSONResponse(
        status_code=500,
        content=APIResponse(
            success=False,
            message="Internal server error",
            error="An unexpected error occurred"
        ).model_dump()
    )


# Startup event
@app.on_event("startup")
async def startup_event():
    """Initialize system on startup."""
    logger.info("Quantum Memory Simulator starting up...")
    for dir_path in (RUNS_ROOT, UPLOADS_ROOT):
        dir_path.mkdir(parents=True, exist_ok=True)
        logger.info(f"Ensured directory exists: {dir_path}")
    logger.info("Quantum Memory Simulator startup completed successfully")


# Main entry point
if __name__ == "__main__":
    logger.info("Starting Quantum Memory Simulator server...")

    uvicorn.run(
        "app:app",
        host="0.0.0.0",
        port=8000,
        reload=False,
        log_level=config.log_level.lower(),
        access_log=True
    )
