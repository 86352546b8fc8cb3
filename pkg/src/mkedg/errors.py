"""Exception types shared across the package."""


class MkedgError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(MkedgError):
    """A data file could not be parsed; message carries the line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


class DomainError(MkedgError):
    """A value fell outside the documented domain of an operation."""


class ShapeError(MkedgError):
    """Tensor operands had incompatible shapes; message names the op."""


class CheckpointError(MkedgError):
    """A checkpoint file is missing, truncated, or inconsistent."""


class ConfigError(MkedgError):
    """A configuration file or value is invalid."""
