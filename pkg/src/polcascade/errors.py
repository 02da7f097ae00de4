"""Exception hierarchy shared by all modules."""


class CascadeError(Exception):
    """Base class for errors raised by polcascade."""


class InvalidArgumentError(CascadeError, ValueError):
    pass


class DomainError(InvalidArgumentError):
    """Argument outside the domain of a physical formula (e.g. acos of >1)."""


class NumericFailureError(CascadeError, RuntimeError):
    """An iterative numerical method did not reach its tolerance.

    ``partial`` carries the best estimate available when the method gave up.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class RankDeficiencyError(NumericFailureError):
    pass


class NonConvergenceError(NumericFailureError):
    pass


class TruncationError(NumericFailureError):
    """Fock-space truncation could not be grown enough to meet the tail criterion."""

    def __init__(self, message, partial=None, diagnostics=None):
        super().__init__(message, partial)
        self.diagnostics = diagnostics or {}


class DegenerateInputError(InvalidArgumentError):
    """The input carries no usable signal (zero emission, flat data, ...)."""


class StepSizeError(InvalidArgumentError):
    """A per-step event probability reached 0.01; use a smaller dt."""


class RegimeError(InvalidArgumentError):
    """Parameters at or above the condensation threshold."""


class SymmetryError(NumericFailureError):
    """Inverse transform left an imaginary residue larger than allowed."""


class ConfigError(CascadeError, ValueError):
    """Invalid run configuration. ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
