"""Exception hierarchy shared by every module.

Each class carries a short ``category`` used by the CLI for its error line.
"""


class WncsError(Exception):
    category = "error"


class DomainError(WncsError, ValueError):
    category = "domain"


class DimensionError(DomainError):
    """Shape mismatch; a special case of an argument outside the domain."""

    category = "dimension"


class DefinitenessError(WncsError, ValueError):
    category = "definiteness"


class NumericError(WncsError, ArithmeticError):
    category = "numeric"


class PreconditionError(WncsError, ValueError):
    category = "precondition"


class StructureError(WncsError, ValueError):
    category = "structure"


class ConfigError(WncsError, ValueError):
    category = "config"

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ConvergenceError(WncsError, ArithmeticError):
    """Relative value iteration failed to reach the requested span."""

    category = "convergence"

    def __init__(self, message, span=None, iterations=None, diagnostic=None):
        self.span = span
        self.iterations = iterations
        self.diagnostic = diagnostic
        super().__init__(message)

    def __str__(self):
        base = super().__str__()
        return f"{base} [{self.diagnostic}]" if self.diagnostic else base


class DivergenceError(WncsError, ArithmeticError):
    """Average cost is unbounded for the requested policy."""

    category = "divergence"
