"""Exception hierarchy.

Configuration-type problems (bad geometry, unknown basis kinds) and
numerical-contract violations (failed solves, indefinite matrices) are kept
apart so the command line can map them to different exit codes.
"""


class IfredError(Exception):
    """Base class for all library errors."""


class ConfigurationError(IfredError, ValueError):
    """Invalid user-supplied parameters."""


class GeometryError(ConfigurationError):
    """A mesh or interface cannot be built or is inconsistent."""


class UnsupportedConfigurationError(ConfigurationError):
    pass


class NumericalContractError(IfredError, ArithmeticError):
    """A numerical guarantee (residual bound, definiteness, conditioning) was breached."""


class AssemblyError(NumericalContractError):
    pass


class DefinitenessError(NumericalContractError):
    pass


class SolverError(NumericalContractError):
    pass


class IllConditionedBasisError(NumericalContractError):
    pass


class ConsistencyError(NumericalContractError):
    """Internal invariant broken (e.g. interface normals with mixed orientation)."""
