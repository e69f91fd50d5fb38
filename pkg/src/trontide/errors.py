"""Exception types shared across the package."""


class TrontideError(Exception):
    """Base class for all package errors."""


class ShapeError(TrontideError, ValueError):
    """Array arguments have incompatible or invalid shapes."""


class DomainError(TrontideError, ValueError):
    """Scalar argument outside the mathematical domain of an operation."""


class NumericError(TrontideError, ArithmeticError):
    """Non-finite values or a failed numerical procedure."""


class DivergenceError(NumericError):
    """Training iterates blew past the divergence guard."""


class UnsupportedDistributionError(TrontideError, ValueError):
    """Operation requires a compactly supported input distribution."""


class ConfigInfeasibleError(TrontideError):
    """A feasibility constraint of the convergence theory is violated.

    Carries the name of the violated inequality plus the marginal values,
    so callers (and the CLI) can report exactly which constraint failed.
    """

    def __init__(self, constraint: str, detail: str = ""):
        self.constraint = constraint
        self.detail = detail
        msg = constraint if not detail else f"{constraint}: {detail}"
        super().__init__(msg)


class TheoremPreconditionError(ConfigInfeasibleError):
    """The spectral positivity precondition (lambda1 > 0) fails."""


class SchemaError(TrontideError, ValueError):
    """Experiment config does not match the schema.

    ``path`` is the dotted location of the offending entry.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"config error at '{path}': {message}")
