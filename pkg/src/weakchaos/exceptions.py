"""Exception types raised across the package."""


class DomainError(ValueError):
    """A point lies outside the domain an operation is defined on."""


class InsufficientPointsError(ValueError):
    """Too few positive points to fit a power law."""


class InsufficientSamplesError(ValueError):
    """Too few uncensored samples for a distributional test."""


class NotPeriodicError(ValueError):
    """The supplied point does not close up under the supplied period."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance."""


class GrazingCollision(ArithmeticError):
    """A billiard collision is (numerically) tangent to the boundary."""


class SolverFailure(ArithmeticError):
    """No boundary intersection was found for a billiard ray."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    ``field`` names the offending key using dotted notation.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
