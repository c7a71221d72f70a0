"""Linear energy-stable IEQ schemes for a binary fluid-surfactant phase-field model."""

from .linsolve import SolverConfig, SolverError, SolveStats, pcg
from .model import Model, ModelParams, State
from .schemes import SchemeKind, march, step
from .spectral import Grid

__all__ = [
    "Grid",
    "Model",
    "ModelParams",
    "SchemeKind",
    "SolveStats",
    "SolverConfig",
    "SolverError",
    "State",
    "march",
    "pcg",
    "step",
]
