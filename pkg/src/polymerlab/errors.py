"""Error taxonomy.

ConfigError (and plain ValueError from validation) map to CLI exit code 2;
ResourceError subclasses map to exit code 3.
"""


class PolymerLabError(Exception):
    pass


class ConfigError(PolymerLabError, ValueError):
    """A configuration field failed validation; the message names the field."""


class ResourceError(PolymerLabError, RuntimeError):
    """A requested computation exceeds a configured resource budget."""


class BoxTooSmallError(ResourceError):
    """The percolation box cannot support the requested walk horizon."""


class ConvolutionBudgetError(ResourceError):
    """A collision-series term index exceeds the dense-convolution budget."""


class EmptyTubeError(ConfigError):
    """floor(L) = 0: the tube is empty by convention and has no verdict."""


class GiantClusterError(ResourceError):
    """Conditioning on the giant component failed or it is unavailable."""
