"""Exception hierarchy for the mobility simulator."""


class MobilitySimError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(MobilitySimError, ValueError):
    """Malformed value, record or file content."""


class ConfigError(MobilitySimError, ValueError):
    """Invalid configuration value."""


class ConfigMismatch(MobilitySimError, ValueError):
    """Inputs that are individually valid but inconsistent with each other."""


class EmptyVector(MobilitySimError, ValueError):
    """Operation needs a location vector with at least one visit."""


class DegenerateBBox(MobilitySimError, ValueError):
    """Bounding box with zero or negative extent."""


class EmptyResult(MobilitySimError, ValueError):
    """A filter removed everything."""


class IdOutOfRange(MobilitySimError, IndexError):
    """Location id outside the tessellation."""


class InsufficientData(MobilitySimError, ValueError):
    """Not enough data to train a model."""


class EmptySamples(MobilitySimError, ValueError):
    """Cannot build a distribution from zero samples."""


class EdgeMismatch(MobilitySimError, ValueError):
    """Distributions compared on different bins."""


class FileUnreadable(MobilitySimError, OSError):
    """Input file missing or unreadable."""


class NoCandidate(MobilitySimError):
    """Location selection found no admissible location."""


class NoNeighbors(MobilitySimError):
    """Agent has no social contacts."""


class NothingReachable(NoCandidate):
    """Exploration candidates exist but none is within reach of the current location."""
