"""Simulation of a driven transmon-resonator system across a hierarchy of
Hamiltonian models, from the charge-basis Cooper-pair box down to a
two-level qubit."""

from .errors import (
    AmbiguousLabel,
    ConfigError,
    DegenerateTrajectory,
    InsufficientEndpoints,
    NegativeDiscriminant,
    NoConvergence,
    NoCrossing,
    StepFailure,
    TimerResolutionError,
    TransmonError,
    WindowTooNarrow,
)
from .models import REFERENCE_PARAMS, EnergyParams, HermitianOperator, ModelSpec, Variant, build_hamiltonian
from .propagator import QuantumState, SolverConfig, evolve, evolve_model, state_fidelity
from .pulse import DriveComponent, drag, gaussian, square

__all__ = [
    "AmbiguousLabel",
    "ConfigError",
    "DegenerateTrajectory",
    "DriveComponent",
    "EnergyParams",
    "HermitianOperator",
    "InsufficientEndpoints",
    "ModelSpec",
    "NegativeDiscriminant",
    "NoConvergence",
    "NoCrossing",
    "QuantumState",
    "SolverConfig",
    "StepFailure",
    "REFERENCE_PARAMS",
    "TimerResolutionError",
    "TransmonError",
    "Variant",
    "WindowTooNarrow",
    "build_hamiltonian",
    "drag",
    "evolve",
    "evolve_model",
    "gaussian",
    "square",
    "state_fidelity",
]
