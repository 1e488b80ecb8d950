"""Exception hierarchy shared by all modules."""


class ManifoldControlError(Exception):
    """Base class for every error raised by this package."""


class ExpressionSyntaxError(ManifoldControlError):
    """Malformed expression text. ``position`` is 1-based."""

    def __init__(self, message: str, position: int, source: str = ""):
        self.position = position
        self.source = source
        super().__init__(f"{message} at position {position}")


class UnknownIdentifierError(ExpressionSyntaxError):
    pass


class DomainError(ManifoldControlError, ArithmeticError):
    """Evaluation left the real domain (log of non-positive, overflow, ...)."""


class UnboundVariableError(ManifoldControlError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unbound variable"


class DimensionError(ManifoldControlError, ValueError):
    pass


class SingularMatrixError(ManifoldControlError):
    pass


class ConfigurationError(ManifoldControlError):
    pass


class DegeneratePointError(ManifoldControlError):
    """The construction has no valid member at this (t, x)."""

    def __init__(self, message: str, t: float, x):
        self.t = t
        self.x = tuple(float(v) for v in x)
        super().__init__(f"{message} at t={t!r}, x={self.x!r}")


class IntegrationError(ManifoldControlError):
    def __init__(self, message: str, last_gamma: float):
        self.last_gamma = last_gamma
        super().__init__(f"{message} (last good gamma={last_gamma!r})")


class SingularChannelError(ManifoldControlError):
    pass


class InfeasibleControlError(ManifoldControlError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")
