"""Exception types raised across the toolkit.

Plain argument problems raise ``ValueError``; the classes below mark the
failure families that callers (mainly the CLI) need to tell apart.
"""


class DesignError(ValueError):
    """A filter cannot be designed with the requested parameters."""


class NotReadyError(RuntimeError):
    """A sliding window was read before it was completely filled."""


class DomainError(ValueError):
    """Input lies outside the domain of a geometric conversion."""


class TrainingError(RuntimeError):
    """A classifier cannot be trained on the supplied data."""


class ConfigurationError(ValueError):
    """An experiment or feature configuration is inconsistent."""


class DataError(OSError):
    """Dataset files are missing, unreadable or malformed."""
