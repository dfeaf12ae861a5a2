"""Pseudo-spectral solver for Keller-Segel chemotaxis coupled to buoyancy-driven
flow (Darcy, quasi-static Stokes, or Navier-Stokes) in a periodic channel."""

from .chemotaxis import chem_potential, ks_rhs
from .diagnostics import DiagnosticsRecord, doubling_report, read_csv, sample, write_csv
from .experiments import (
    ConfigError,
    DatumSpec,
    RunConfig,
    SweepConfig,
    initial_state,
    parse_config,
    run_comparison,
    run_single,
    run_sweep,
)
from .fields import FlowLaw, ModelParams, Scheme, SimState
from .integrate import (
    CheckpointError,
    Detector,
    OutcomeKind,
    RunOutcome,
    StepController,
    checkpoint_load,
    checkpoint_save,
    integrate,
    step,
)
from .spectral import Basis, Grid, SpectralField, to_physical, to_spectral
from .velocity import Velocity, velocity_of

__all__ = [
    "Basis",
    "CheckpointError",
    "ConfigError",
    "DatumSpec",
    "Detector",
    "DiagnosticsRecord",
    "FlowLaw",
    "Grid",
    "ModelParams",
    "OutcomeKind",
    "RunConfig",
    "RunOutcome",
    "Scheme",
    "SimState",
    "SpectralField",
    "StepController",
    "SweepConfig",
    "Velocity",
    "chem_potential",
    "checkpoint_load",
    "checkpoint_save",
    "doubling_report",
    "initial_state",
    "integrate",
    "ks_rhs",
    "parse_config",
    "read_csv",
    "run_comparison",
    "run_single",
    "run_sweep",
    "sample",
    "step",
    "to_physical",
    "to_spectral",
    "velocity_of",
    "write_csv",
]
