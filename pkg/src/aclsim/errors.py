"""Exception types shared across the package."""


class AclsimError(Exception):
    """Base class for all package-specific errors."""


class InvalidConfig(AclsimError):
    """Beam configuration violates a physical or structural requirement."""


class ConfigParseError(InvalidConfig):
    """Config file could not be parsed; message carries the line number."""


class WrongFamily(AclsimError):
    """Operation requires a different finite-element family."""


class MeshMismatch(AclsimError):
    """Two spaces expected to share one mesh do not."""


class SingularSystem(AclsimError):
    """A linear system that should be SPD failed to factorize."""


class XiZero(AclsimError):
    """Operation undefined for xi == 0."""


class UnsupportedCombination(InvalidConfig):
    """Requested electromagnetic assumption / actuation mode pair is not modeled."""


class ModeViolation(AclsimError):
    """A signal violates the exclusivity rule of the actuation mode."""


class DimensionMismatch(AclsimError):
    """Vector length does not match the system layout."""


class OutOfDomain(AclsimError):
    """Evaluation point outside [0, L]."""


class WrongVariant(AclsimError):
    """Operation only defined for a different electromagnetic assumption."""


class SolverFailure(AclsimError):
    """Time-step linear solve failed; carries the step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EigSolverFailure(AclsimError):
    """Eigenvalue computation did not converge."""
