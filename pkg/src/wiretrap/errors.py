"""Exception hierarchy shared by the solver, analysis and CLI layers."""


class WireTrapError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(WireTrapError, ValueError):
    """Invalid run configuration or invalid constructor arguments."""


class DomainError(WireTrapError, ValueError):
    """A formula was evaluated outside the range where it is defined."""


class NumericalError(WireTrapError, ArithmeticError):
    """Base class for numerical failures (CLI exit code 3)."""


class SingularityError(NumericalError):
    """Field requested on (or too close to) a current-carrying surface."""


class ConvergenceError(NumericalError):
    """An iterative solver or quadrature refinement did not converge."""


class EscapeError(ConvergenceError):
    """The minimizer left the admissible region (no trap, or it hit a conductor)."""


class NoCrossingError(NumericalError):
    """Two potentials never cross inside the search bracket."""
