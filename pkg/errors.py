"""
Exception hierarchy for the optical quantum memory simulator.

Every error carries the CLI exit code it maps to:
- 2: configuration error
- 3: numeric / convergence / domain error
- 4: I/O error
"""

from typing import Optional


class SimulatorError(Exception):
    """Base class for all simulator errors."""
    exit_code: int = 3


class InvalidDimensionError(SimulatorError, ValueError):
    """Fock truncation below the allowed minimum."""


class DimensionMismatchError(SimulatorError, ValueError):
    """Two operands live in Fock spaces of different truncation."""


class InvalidStateError(SimulatorError, ValueError):
    """Matrix violates the density-matrix invariants."""


class InvalidParameterError(SimulatorError, ValueError):
    """Parameter outside its documented range."""


class TruncationRiskError(SimulatorError, ValueError):
    """Operator amplitude too large for the Fock truncation in use."""


class NonNormalizableError(SimulatorError, ValueError):
    """Two-mode squeezed vacuum requested with lambda >= 1."""


class DegenerateHeraldError(SimulatorError, ValueError):
    """The heralding click has zero probability."""


class GridMismatchError(SimulatorError, ValueError):
    """Trace and temporal mode are sampled on different time grids."""


class AmbiguousModeError(SimulatorError):
    """Principal-component analysis found no unique dominant mode."""


class TooFewPhasesError(SimulatorError, ValueError):
    """Homodyne phases cannot identify the off-diagonal elements."""


class UnreliableSubspaceError(SimulatorError, ValueError):
    """Too little weight in the vacuum/single-photon block."""


class UndefinedLossError(SimulatorError, ValueError):
    """Loss cannot be inferred without a single-photon reference."""


class EmptyInputError(SimulatorError, ValueError):
    """An operation received an empty list where data is required."""


class ConfigError(SimulatorError):
    """Invalid experiment configuration, tagged with the offending key."""
    exit_code = 2

    def __init__(self, message: str, key_path: Optional[str] = None):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class OutputIOError(SimulatorError):
    """Reading or writing a data file failed."""
    exit_code = 4
