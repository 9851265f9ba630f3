"""Exception hierarchy shared by every module in the package."""


class VplError(Exception):
    """Base class for all package errors."""


class ConfigurationError(VplError, ValueError):
    """Invalid parameters, empty admissible class, malformed config file."""


class DomainError(VplError, ValueError):
    """A point lies outside the open unit disk (or a radius outside (0, 1))."""


class SingularityError(VplError, ValueError):
    """Kernel evaluated at coincident points."""


class ContractViolation(VplError, ValueError):
    """Length mismatch, empty support, zero mass and similar caller errors."""


class InfeasibleError(VplError):
    """Requested mass cannot be carried by the available cells under the bound."""


class NumericalFailure(VplError, RuntimeError):
    """Iterative method failed to converge."""


class AscentViolation(VplError, RuntimeError):
    """Energy decreased between iterations of the ascent loop."""


class PatchFormError(VplError):
    """Converged vorticity is not a function of the stream function."""
