"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`DiffusionFactorError`.  The harness maps the three families
(config, data, numerical) onto process exit codes 2, 3 and 4.
"""


class DiffusionFactorError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DiffusionFactorError, ValueError):
    """Shapes, symmetry or value ranges violate an operation's contract."""


class RangeError(InvalidInputError):
    """A diffusion time lies outside the schedule's horizon."""


class DegenerateInputError(InvalidInputError):
    """Input is rank deficient or otherwise degenerate."""


class SingularMatrixError(DiffusionFactorError, ArithmeticError):
    """A matrix that must be (positive) definite is not."""


class UnsupportedLawError(DiffusionFactorError, TypeError):
    """The factor law does not support the requested closed form."""


class NumericalUnderflowError(DiffusionFactorError, ArithmeticError):
    """All posterior kernel weights vanished."""


class InsufficientDataError(DiffusionFactorError, ValueError):
    """Too few observations for the requested estimate."""


class InfeasibleError(DiffusionFactorError, ValueError):
    """The portfolio constraint set is empty."""


class AlignmentError(DiffusionFactorError, ValueError):
    """Weights and returns do not share the same dates or assets."""


class NumericalAbort(DiffusionFactorError, ArithmeticError):
    """Training or sampling produced non-finite values."""

    def __init__(self, message, **context):
        self.context = context
        if context:
            detail = ", ".join(f"{k}={v}" for k, v in context.items())
            message = f"{message} ({detail})"
        super().__init__(message)


class ConfigError(DiffusionFactorError, ValueError):
    """Experiment configuration is invalid."""


class DataError(DiffusionFactorError, ValueError):
    """Input data files are malformed."""
