"""Exception hierarchy shared across the toolkit."""


class CholbandError(Exception):
    """Base class for all toolkit errors."""


class DataError(CholbandError, ValueError):
    """Invalid inputs: bad dimensions, domain violations, malformed files."""


class NumericalError(CholbandError, RuntimeError):
    """A numerical invariant failed (singular system, broken descent, ...)."""


class SelectionError(NumericalError):
    """Tuning-parameter selection had no admissible candidate."""
