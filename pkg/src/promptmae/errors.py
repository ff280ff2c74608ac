"""Exception taxonomy shared across the package."""


class PromptMaeError(Exception):
    """Base class for every error this package raises deliberately."""


class DimensionError(PromptMaeError):
    """Tensor shapes do not satisfy an operation's contract."""


class ConfigError(PromptMaeError):
    """A configuration value is invalid or inconsistent."""


class ContractError(PromptMaeError):
    """A caller violated an API precondition."""


class ParseError(PromptMaeError):
    """Input file could not be parsed; message carries row/column."""


class DatasetError(PromptMaeError):
    """Dataset is unusable for the requested operation (too small, empty split)."""
