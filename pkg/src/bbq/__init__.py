"""Pseudo-spectral damped Boussinesq solver with Littlewood-Paley diagnostics."""

from .errors import (
    BBQError,
    BlowUpError,
    ConfigError,
    DataError,
    InvariantError,
    ParameterError,
    PreconditionError,
    StabilityError,
)
from .spectral import GridSpec, RealField, SpectralField, VectorField
from .littlewood_paley import BesovParams, DyadicPartition, besov_norm, build_partition
from .solver import (
    InitialDataSpec,
    ModelParams,
    SimState,
    StepperConfig,
    Trajectory,
    make_initial_data,
    run,
    step,
)
from .diagnostics import DEFAULT_C0, DiagnosticsObserver, DiagnosticsRecord, ThresholdConfig

__version__ = "0.1.0"

__all__ = [
    "BBQError", "BlowUpError", "ConfigError", "DataError", "InvariantError",
    "ParameterError", "PreconditionError", "StabilityError",
    "GridSpec", "RealField", "SpectralField", "VectorField",
    "BesovParams", "DyadicPartition", "besov_norm", "build_partition",
    "InitialDataSpec", "ModelParams", "SimState", "StepperConfig", "Trajectory",
    "make_initial_data", "run", "step",
    "DEFAULT_C0", "DiagnosticsObserver", "DiagnosticsRecord", "ThresholdConfig",
]
