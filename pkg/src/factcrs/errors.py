"""Exception types shared across the package."""


class FactCrsError(Exception):
    """Base class for errors raised by this package."""


class DataFormatError(FactCrsError):
    """A corpus file is missing, malformed, or references an unknown id."""


class ConfigError(FactCrsError):
    """A config file or override contains an unknown key or a bad value."""


class NumericalError(FactCrsError):
    """An optimization or loss evaluation produced a non-finite value."""


class ModelFormatError(FactCrsError):
    """A model file is unreadable: bad magic, version, truncation, checksum."""


class SessionProtocolError(FactCrsError):
    """A session operation was called out of order or on a finished session."""


class VocabularyMismatchError(FactCrsError):
    """A model and a dataset disagree on the attribute vocabulary."""
