"""Exception taxonomy shared across the package.

Plain ``ValueError`` is used for malformed arguments (wrong shapes, points off
the grid, exponents out of range). The two classes below separate failures the
command line reports with distinct exit codes.
"""


class ConfigError(ValueError):
    """A configuration file or derived-constant cross-check is invalid."""


class NumericsError(RuntimeError):
    """A numerical diagnostic: blow-up, non-convergent series, overflow range.

    Carries optional structured context so callers can report the offending
    time, cell or maximum safe parameter.
    """

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = dict(context)
