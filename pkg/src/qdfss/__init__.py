"""Fine-structure splitting of a gated quantum dot in a nanowire.

Electrostatics of a four-gate nanowire cross-section, effective-mass ground
states of the electron and heavy hole, and the long-range exchange splitting
that follows from their overlap and shape.
"""

from .device import DeviceSpec, GeometryError, Grid2D, MaterialParams, build_material_map
from .excitonics import ExcitonReport, SolverSettings, evaluate_configuration, solve_carriers
from .poisson import ConvergenceError, GateVoltages, solve_poisson, superpose
from .sweep import (
    QuadrupoleParam,
    lateral_gates,
    minimize_fss,
    sweep_grid_asymmetric,
    sweep_lateral,
    sweep_quadrupole,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DeviceSpec",
    "ExcitonReport",
    "GateVoltages",
    "GeometryError",
    "Grid2D",
    "MaterialParams",
    "QuadrupoleParam",
    "SolverSettings",
    "build_material_map",
    "evaluate_configuration",
    "lateral_gates",
    "minimize_fss",
    "solve_carriers",
    "solve_poisson",
    "superpose",
    "sweep_grid_asymmetric",
    "sweep_lateral",
    "sweep_quadrupole",
]
