"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class PatticaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PatticaError):
    """Invalid configuration or mutually exclusive options (CLI exit code 2)."""


class DataError(PatticaError):
    """Malformed or contract-violating input data (CLI exit code 3)."""


class NumericalError(PatticaError):
    """Degenerate numerical situation, e.g. an undefined rescaling (CLI exit code 4)."""
