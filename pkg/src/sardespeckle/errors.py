"""Exception hierarchy shared by the toolkit.

The CLI maps these onto exit codes: usage errors exit 1, InputError /
ParseError / ConfigError exit 2, NumericalError exit 3.
"""


class SpeckleError(Exception):
    """Base class for toolkit errors."""


class InputError(SpeckleError, ValueError):
    """Invalid input data (wrong domain, shape, degenerate image, ...)."""


class ParseError(SpeckleError, ValueError):
    """Malformed file (bad magic, truncated payload, bad header)."""


class ConfigError(SpeckleError, ValueError):
    """Inconsistent configuration (denoiser strength off-grid, L mismatch)."""


class NumericalError(SpeckleError, RuntimeError):
    """A numerical procedure failed to converge or produced non-finite values."""
