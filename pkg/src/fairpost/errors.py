"""Exception types shared across the package."""


class FairpostError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(FairpostError, ValueError):
    """Caller passed inconsistent or out-of-range inputs."""


class InvalidStateError(FairpostError, RuntimeError):
    """Operation applied to an object in the wrong state (e.g. non-optimal solution)."""


class DataError(FairpostError, ValueError):
    """Malformed input file: missing column, bad cell, label out of range."""


class SolverError(FairpostError, RuntimeError):
    """LP solve failed definitively; carries a text dump of the offending program."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump


class SizeCapError(FairpostError, ValueError):
    """Instance exceeds the size cap of an exhaustive-search routine."""
