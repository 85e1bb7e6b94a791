"""Exception types shared across the package."""


class RomcError(Exception):
    """Base class for package-specific failures."""


class NumericalFailure(RomcError):
    """A numeric routine produced non-finite values or could not proceed.

    Carries the parameter point being probed when one is known, so callers
    can report where the computation broke down.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegenerateResult(RomcError):
    """A result exists formally but carries no information, e.g. all
    weights zero or a partition function of zero mass."""


class UnsupportedDimension(RomcError):
    """The requested operation is only implemented for low dimensions."""
