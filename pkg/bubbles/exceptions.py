"""Error hierarchy. Validation failures exit 1 from the CLI, numerical failures exit 2."""


class HalfwaveError(Exception):
    """Base class for every error raised by the bubbles app."""


class ValidationFailure(HalfwaveError, ValueError):
    exit_code = 1


class NumericalFailure(HalfwaveError, ArithmeticError):
    exit_code = 2


class GridError(ValidationFailure):
    pass


class ParameterError(ValidationFailure):
    pass


class UnsupportedOperatorError(ValidationFailure):
    pass


class InvalidCorridorError(ValidationFailure):
    pass


class CheckpointError(ValidationFailure):
    pass


class DecayFitError(ValidationFailure):
    pass


class ConfigError(ValidationFailure):
    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or {}


class ConvergenceError(NumericalFailure):
    pass


class PositivityError(NumericalFailure):
    pass


class KernelCompatibilityError(NumericalFailure):
    pass


class StagnationError(NumericalFailure):
    pass


class UnderResolvedError(NumericalFailure):
    pass


class NumericalInstabilityError(NumericalFailure):
    pass


class SingularJacobianError(NumericalFailure):
    pass


class NewtonDivergenceError(NumericalFailure):
    pass


class ConvexityError(NumericalFailure):
    pass
