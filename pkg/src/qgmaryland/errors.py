"""Exception hierarchy.

Input problems derive from :class:`InputError` (a ``ValueError``); numerical
failures derive from :class:`NumericalError`. The CLI maps the first family to
exit code 2 and the second to exit code 1.
"""


class QGError(Exception):
    """Base class for all package errors."""


class InputError(QGError, ValueError):
    """Invalid model, parameter or configuration input."""


class DegeneratePhaseError(InputError):
    """The coupling ``-g tan(pi <omega, m> + phi)`` hits a pole."""

    def __init__(self, message, m=None):
        super().__init__(message)
        self.m = m


class RationalityError(InputError):
    """``<omega, m>`` is an integer for some nonzero lattice index."""

    def __init__(self, message, m=None):
        super().__init__(message)
        self.m = m


class NumericalError(QGError, ArithmeticError):
    """A numerical procedure failed or produced an inconsistent result."""


class NearDirichletError(NumericalError):
    """Energy too close to a Dirichlet eigenvalue of some edge."""


class ConvergenceError(NumericalError):
    """An iterative procedure did not reach its tolerance."""


class SmallDivisorError(NumericalError):
    """A divisor ``1 - exp(2 pi i <omega, n>)`` fell below the floor."""


class ResourceError(NumericalError):
    """Requested problem size exceeds the configured cap."""
