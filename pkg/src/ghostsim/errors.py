"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class GhostsimError(Exception):
    exit_code = 1


class ConfigError(GhostsimError):
    """Invalid or malformed run configuration."""

    exit_code = 2


class FormatError(ConfigError):
    """An input file (object CSV, pattern library) does not match its format."""


class ParameterError(GhostsimError, ValueError):
    """A numeric parameter is outside its admissible range."""

    exit_code = 2


class SamplingError(GhostsimError):
    """The grid violates the Fresnel sampling guard."""

    exit_code = 3


class DimensionError(GhostsimError, ValueError):
    exit_code = 3


class DegenerateDistributionError(GhostsimError):
    exit_code = 3


class InsufficientDataError(GhostsimError):
    exit_code = 4
