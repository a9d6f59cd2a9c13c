"""Exception hierarchy with stable machine-readable categories.

The CLI maps ``category`` to its exit code and prints it on stderr, so
scripts can branch on failures without parsing prose.
"""


class JedError(Exception):
    category = "error"


class ConfigurationError(JedError):
    """Invalid option, dimension spec, or model parameter."""

    category = "config"


class ShapeError(JedError):
    """Matrix dimensions do not agree."""

    category = "shape"


class RankError(JedError):
    """Underdetermined system or singular Gram matrix."""

    category = "rank"


class CapacityError(JedError):
    """Requested search space exceeds the enforced enumeration cap."""

    category = "capacity"


class NumericalError(JedError):
    """A linear solve or factorization failed."""

    category = "numerical"


class DivergenceError(JedError):
    """Langevin iterates left the finite range (step size / schedule misconfiguration)."""

    category = "divergence"

    def __init__(self, message: str, level: int | None = None, step: int | None = None):
        super().__init__(message)
        self.level = level
        self.step = step


class FormatError(JedError):
    """Malformed binary dataset or weights file."""

    category = "format"


class ContractError(JedError):
    """Caller violated a documented precondition on the data."""

    category = "contract"


class UndefinedResultError(JedError):
    """The requested quantity is mathematically undefined for this input."""

    category = "undefined"
