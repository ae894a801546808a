"""Exception types shared across the package."""


class CabnluError(Exception):
    """Base class for all package errors."""


class ShapeError(CabnluError):
    """Operand shapes are incompatible for the requested operation."""


class NumericError(CabnluError):
    """Non-finite or otherwise invalid numeric input."""


class ContractError(CabnluError):
    """A caller violated an operation's contract (empty input, non-scalar loss, ...)."""


class ConfigError(CabnluError):
    """Invalid configuration value."""


class DataError(CabnluError):
    """Invalid corpus or training data."""


class FormatError(CabnluError):
    """Malformed external file (embeddings, corpus, model file)."""
