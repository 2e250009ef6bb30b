"""
Configuration Management for the Optical Quantum Memory Simulator

This module handles two layers of configuration:

- process settings (logging, truncation guards, worker counts) loaded from
  environment variables and .env files using python-dotenv and
  pydantic-settings;
- experiment descriptions read from flat dotted-key text files
  (``memory.half_life_us = 1.3``) and validated with pydantic models.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from dotenv import load_dotenv
from pydantic import (BaseModel, ConfigDict, Field, ValidationError,
                      field_validator, model_validator)
from pydantic_settings import BaseSettings, SettingsConfigDict

from errors import ConfigError, OutputIOError

# SeedSequence entropy words are unsigned 64-bit
SEED_LIMIT = 2 ** 64


class AppConfig(BaseSettings):
    """Process-wide settings with validation."""

    model_config = SettingsConfigDict(
        env_prefix="QMEM_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging Configuration
    log_level: str = "INFO"
    log_format: str = "colored"
    log_file: str = "qmem.log"

    # Output
    output_dir: str = "outputs"

    # Fock truncation
    compute_dim: int = 20
    report_dim: int = 10
    witness_dim: int = 40
    displacement_guard: float = 0.25
    squeezing_guard: float = 1.5
    squeezing_guard_min_dim: int = 20
    wigner_max_work_dim: int = 400

    # Homodyne trace grid
    trace_step_ns: float = 2.0
    trace_window_ns: float = 2000.0

    # Parallelism (0 = one worker per physical core)
    max_workers: int = 0

    @field_validator('log_level')
    @classmethod
    def validate_log_level(cls, v):
        """Validate log level."""
        valid_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if v.upper() not in valid_levels:
            raise ValueError(f'Log level must be one of: {valid_levels}')
        return v.upper()

    @field_validator('log_format')
    @classmethod
    def validate_log_format(cls, v):
        """Validate console log format."""
        if v.lower() not in ('colored', 'plain'):
            raise ValueError("Log format must be 'colored' or 'plain'")
        return v.lower()

    @field_validator('compute_dim', 'report_dim', 'witness_dim', 'squeezing_guard_min_dim')
    @classmethod
    def validate_dim(cls, v):
        """Fock truncations keep at least |0> and |1>."""
        if v < 2:
            raise ValueError('Fock dimension must be at least 2')
        return v

    @field_validator('displacement_guard', 'squeezing_guard', 'trace_step_ns', 'trace_window_ns')
    @classmethod
    def validate_positive(cls, v):
        """Guards and grid steps must be positive."""
        if v <= 0:
            raise ValueError('must be positive')
        return v


def load_config() -> AppConfig:
    """
    Load configuration from environment variables and .env file.

    Returns:
        AppConfig: Validated configuration object
    """
    env_path = Path('.env')
    if env_path.exists():
        load_dotenv(env_path)

    try:
        return AppConfig()
    except ValidationError as e:
        logging.getLogger("qmem").error(f"Configuration error: {e}")
        print("Using default configuration.")
        return AppConfig.model_construct()


def setup_logging(config: AppConfig) -> logging.Logger:
    """
    Setup logging configuration based on config settings.

    Args:
        config (AppConfig): Application configuration

    Returns:
        logging.Logger: Configured logger instance
    """
    log_level = getattr(logging, config.log_level)

    logger = logging.getLogger("qmem")
    logger.setLevel(log_level)
    logger.propagate = False

    # Remove existing handlers to avoid duplicates
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    plain_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    if config.log_format == "colored":
        import colorlog
        console_formatter = colorlog.ColoredFormatter(
            "%(log_color)s" + plain_format,
            datefmt="%Y-%m-%d %H:%M:%S",
            log_colors={
                'DEBUG': 'cyan',
                'INFO': 'green',
                'WARNING': 'yellow',
                'ERROR': 'red',
                'CRITICAL': 'red,bg_white',
            }
        )
    else:
        console_formatter = logging.Formatter(plain_format, datefmt="%Y-%m-%d %H:%M:%S")

    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(console_formatter)
    logger.addHandler(console_handler)

    if config.log_file:
        log_dir = Path("logs")
        log_dir.mkdir(exist_ok=True)
        file_handler = logging.FileHandler(log_dir / config.log_file)
        file_handler.setLevel(logging.DEBUG)  # Always log DEBUG to file
        file_handler.setFormatter(logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        ))
        logger.addHandler(file_handler)

    logger.debug(f"Logging initialized - Level: {config.log_level}")
    return logger


# Global configuration instance
_config: Optional[AppConfig] = None
_logger: Optional[logging.Logger] = None


def get_config() -> AppConfig:
    """Get the global configuration instance."""
    global _config
    if _config is None:
        _config = load_config()
    return _config


def get_logger() -> logging.Logger:
    """Get the global logger instance."""
    global _logger
    if _logger is None:
        _logger = setup_logging(get_config())
    return _logger


def set_log_level(level: str) -> None:
    """Override the console log level after startup (CLI --log-level)."""
    logger = get_logger()
    numeric = getattr(logging, level.upper())
    logger.setLevel(numeric)
    for handler in logger.handlers:
        if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
            handler.setLevel(numeric)


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

def _split_list(v: Any) -> Any:
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    return v


class PreparationConfig(BaseModel):
    """Heralded preparation from a displaced-idler two-mode squeezed vacuum."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lambda_: float = Field(0.1, alias="lambda", ge=0.0, lt=1.0)
    delta_re: float = 0.0990195135927848
    delta_im: float = 0.0
    click_model: Literal["exact_one_photon", "not_vacuum"] = "exact_one_photon"
    eta: float = Field(1.0, ge=0.0, le=1.0)


class IdealStateConfig(BaseModel):
    """Ideal alpha|0> + beta e^{i theta}|1> source state."""
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(0.7071067811865476, ge=0.0)
    beta: float = Field(0.7071067811865476, ge=0.0)
    theta_deg: float = 0.0

    @model_validator(mode="after")
    def check_normalized(self):
        if abs(self.alpha ** 2 + self.beta ** 2 - 1.0) > 1e-9:
            raise ValueError("alpha^2 + beta^2 must equal 1")
        return self


class MemoryConfig(BaseModel):
    """Storage channel in laboratory units."""
    model_config = ConfigDict(extra="forbid")

    half_life_us: float = Field(1.3, gt=0.0)
    detuning_khz: float = 300.0
    sigma_deg: float = Field(0.0, ge=0.0)
    eta: float = Field(1.0, ge=0.0, le=1.0)
    initial_loss: float = Field(0.0, ge=0.0, le=1.0)


class AcquisitionConfig(BaseModel):
    """Homodyne acquisition geometry and randomness."""
    model_config = ConfigDict(extra="forbid")

    storage_times_ns: List[float] = Field(default_factory=lambda: [0.0, 100.0, 200.0, 300.0, 400.0])
    phases_deg: List[float] = Field(default_factory=lambda: [0.0, 30.0, 60.0, 90.0, 120.0, 150.0])
    n_per_phase: int = Field(20000, ge=1)
    seed: int = Field(0, ge=0, lt=SEED_LIMIT)
    dim: int = Field(20, ge=2)

    @field_validator("storage_times_ns", "phases_deg", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split_list(v)

    @field_validator("storage_times_ns")
    @classmethod
    def check_times(cls, v):
        if any(t < 0 for t in v):
            raise ValueError("storage times must be non-negative")
        return v

    @field_validator("phases_deg")
    @classmethod
    def check_phases(cls, v):
        if not v:
            raise ValueError("at least one phase is required")
        return v


class AnalysisConfig(BaseModel):
    """Reconstruction and phase-space analysis settings."""
    model_config = ConfigDict(extra="forbid")

    reconstruction_dim: int = Field(10, ge=2)
    max_iters: int = Field(2000, ge=1)
    tol: float = Field(1e-9, gt=0.0)
    binning: Literal["per_sample", "binned"] = "per_sample"
    n_bins: int = Field(200, ge=2)
    x_min: float = -6.0
    x_max: float = 6.0
    grid_min: float = -3.0
    grid_max: float = 3.0
    grid_step: float = Field(0.05, gt=0.0)
    gamma_max: float = Field(1.5, ge=0.0)
    gamma_step: float = Field(0.05, gt=0.0)


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str = "outputs"


class ExperimentConfig(BaseModel):
    """Complete description of one simulate/reconstruct/analyze run."""
    model_config = ConfigDict(extra="forbid")

    preparation: Optional[PreparationConfig] = None
    ideal: Optional[IdealStateConfig] = None
    memory: MemoryConfig = Field(default_factory=MemoryConfig)
    acquisition: AcquisitionConfig = Field(default_factory=AcquisitionConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def check_state_source(self):
        if self.preparation is not None and self.ideal is not None:
            raise ValueError("give either a [preparation] or an [ideal] section, not both")
        if self.preparation is None and self.ideal is None:
            self.ideal = IdealStateConfig()
        return self


def parse_dotted(text: str) -> Dict[str, Any]:
    """
    Parse the flat dotted-key grammar into a nested dictionary.

    Grammar: one ``section.key = value`` per line; ``#`` starts a comment;
    blank lines are ignored; values are kept as strings for pydantic to
    coerce (lists are comma-separated).
    """
    tree: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        parts = key.split(".")
        if len(parts) != 2 or not all(parts):
            raise ConfigError(f"line {lineno}: keys take the form section.key", key_path=key)
        tree.setdefault(parts[0], {})[parts[1]] = value
    return tree


def build_experiment_config(tree: Dict[str, Any]) -> ExperimentConfig:
    """Validate a nested dictionary, re-raising with the dotted key path."""
    try:
        return ExperimentConfig.model_validate(tree)
    except ValidationError as e:
        first = e.errors()[0]
        key_path = ".".join(str(part) for part in first["loc"]) or None
        raise ConfigError(first["msg"], key_path=key_path) from e


def load_experiment_config(path: Optional[str] = None) -> ExperimentConfig:
    """
    Load an experiment configuration file.

    Args:
        path (str, optional): Path to a dotted-key file. Defaults are used when None.

    Returns:
        ExperimentConfig: Validated experiment configuration
    """
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise OutputIOError(f"Cannot read config file {path}: {e}") from e
    return build_experiment_config(parse_dotted(text))
