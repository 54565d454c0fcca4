"""Fitted-mesh P1 solvers for elliptic interface problems, conservative flux
recovery and reduction of the interface datum."""

from .errors import (ConfigurationError, DefinitenessError, GeometryError, IfredError,
                     IllConditionedBasisError, NumericalContractError, SolverError)
from .experiments import RunConfig, build_case, run_experiment, table_config
from .fem import FLUX_JUMP, SOLUTION_JUMP, ProblemSpec, TransmissionSolver
from .flux import RecoveredFlux, recover_flux
from .mesh import FittedMesh, build_line_mesh, build_mapped_mesh, extract_interface
from .reduction import InterfaceReduction, make_basis, project_interface_data

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DefinitenessError", "GeometryError", "IfredError",
    "IllConditionedBasisError", "NumericalContractError", "SolverError",
    "RunConfig", "build_case", "run_experiment", "table_config",
    "FLUX_JUMP", "SOLUTION_JUMP", "ProblemSpec", "TransmissionSolver",
    "RecoveredFlux", "recover_flux",
    "FittedMesh", "build_line_mesh", "build_mapped_mesh", "extract_interface",
    "InterfaceReduction", "make_basis", "project_interface_data",
]
