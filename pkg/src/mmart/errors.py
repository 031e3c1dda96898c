"""Exception types shared across the pipeline."""


class MmartError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(MmartError):
    """Bad configuration, missing mode inputs, or CLI misuse (exit code 2)."""


class DataError(MmartError):
    """Malformed or missing input data (exit code 3)."""


class NumericError(MmartError):
    """Training or evaluation produced non-finite values (exit code 4)."""
