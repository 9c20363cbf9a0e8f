"""Exception hierarchy.

Input errors map to CLI exit code 2, numerical failures to exit code 3.
"""


class KacRiceError(Exception):
    """Base class for all package errors."""


class InputError(KacRiceError, ValueError):
    """The supplied problem or arguments are malformed."""


class NumericalError(KacRiceError, ArithmeticError):
    """A computation failed to produce a trustworthy number."""


class DimensionMismatch(InputError):
    pass


ShapeMismatch = DimensionMismatch


class NotPSD(InputError):
    pass


class BadGroups(InputError):
    pass


class TieAtMax(InputError):
    """The maximizer of the process is not unique (general position violated)."""


class UnknownScenario(InputError, KeyError):
    pass


class EmptySample(InputError):
    pass


class DomainError(InputError):
    pass


class InvalidPivotInputs(InputError):
    pass


class NegativeFactor(NumericalError):
    pass


class NonMonotone(NumericalError):
    pass


class SingularG(NumericalError):
    pass


class MaxIterations(NumericalError):
    """Iterative solver hit its budget; carries the best iterate found."""

    def __init__(self, message, value=None, residual=None, iterations=None):
        super().__init__(message)
        self.value = value
        self.residual = residual
        self.iterations = iterations
