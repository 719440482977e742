"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(ToolkitError):
    """Unreadable, unsupported, or multi-channel raster file."""


class ShapeMismatchError(ToolkitError):
    """Two rasters that must share a shape do not."""


class BoundsError(ToolkitError):
    """A region of interest falls outside its image."""


class ConfigError(ToolkitError):
    """Invalid configuration or argument value."""


class DegenerateInputError(ToolkitError):
    """Input lacks the variety an algorithm needs, e.g. fewer distinct
    intensities than requested clusters."""


class MarkerConflictError(ToolkitError):
    """Marker placement leaves no room for background seeds."""


class UndefinedMetricError(ToolkitError):
    """Metric is undefined for the given mask pair."""
