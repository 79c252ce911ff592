"""Exception hierarchy shared by the library and the CLI."""


class NetformError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(NetformError, ValueError):
    exit_code = 2


class InfeasibleSizeError(NetformError, ValueError):
    """A request would enumerate more states or maps than the library allows."""

    exit_code = 3


class NumericalError(NetformError, ArithmeticError):
    exit_code = 4


class InvalidDyadError(NetformError, ValueError):
    exit_code = 2


class ShapeMismatchError(NetformError, ValueError):
    exit_code = 2


class NonConservativeError(NetformError, ValueError):
    """Raised when a potential is requested for utilities that admit none."""

    exit_code = 2

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"utilities are not conservative (worst residual {report.worst_residual:.3g}, "
            f"witness {report.witness})"
        )


class SignConditionError(NetformError, ValueError):
    """Motif values outside the regime where the mean-field reduction holds."""

    exit_code = 2


class InternalConsistencyError(NetformError, RuntimeError):
    pass
