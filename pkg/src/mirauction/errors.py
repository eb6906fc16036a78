"""Exception types shared across the package."""


class MIRError(Exception):
    """Base class for all package errors."""


class MalformedInput(MIRError, ValueError):
    """Input violates a documented precondition (bad index, bad size, ...)."""


class ScaleRefused(MIRError):
    """The requested computation exceeds a configured enumeration budget."""


class SearchFailed(MIRError):
    """A randomized search exhausted its draw budget.

    ``witness`` carries an item set that no sampled candidate covered.
    """

    def __init__(self, message, witness=None, draws=0):
        super().__init__(message)
        self.witness = witness
        self.draws = draws


class PreconditionFailed(MIRError):
    """A structural precondition of a checker does not hold."""
