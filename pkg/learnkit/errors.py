"""Exception hierarchy shared by the learners and the CLI."""


class LearnkitError(Exception):
    """Base class for errors caused by data or numerics, not by usage."""


class DataError(LearnkitError, ValueError):
    """Malformed or inconsistent input data."""


class NetworkFormatError(DataError):
    """Invalid belief-network description or structure."""


class ModelFormatError(DataError):
    """Malformed serialized model or rule file."""


class NumericError(LearnkitError, ArithmeticError):
    """A computation could not produce a meaningful number."""


class ImpossibleEvidenceError(NumericError):
    """Evidence has zero probability under the network."""


class NoPredictionError(LearnkitError):
    """No class could be predicted for an example."""


class ConfigError(LearnkitError, ValueError):
    """Settings taken from the environment failed validation."""
