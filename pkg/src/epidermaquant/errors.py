"""Exceptions raised by the pipeline stages."""


class EpidermaQuantError(Exception):
    """Base class for all pipeline errors."""


class EmptyMask(EpidermaQuantError):
    """A mask that must contain tissue has no true pixel."""


class DegenerateInput(EpidermaQuantError):
    """Input carries too little signal for the requested estimate."""


class SingularMatrix(EpidermaQuantError):
    """Stain matrix cannot be inverted."""


class UndefinedForKOne(EpidermaQuantError):
    """Cluster validity index requested for a single cluster."""


class TooFewPoints(EpidermaQuantError):
    """More clusters requested than there are points."""


class SubsetViolation(EpidermaQuantError):
    """A DAB mask has pixels outside the tissue mask."""


class EmptyInput(EpidermaQuantError):
    """A required list or directory is empty."""


class DecodeError(EpidermaQuantError):
    """An image file could not be read as 8-bit RGB."""


class ConfigError(EpidermaQuantError):
    """Invalid configuration key or value."""
