"""Exception hierarchy shared by every module."""


class StrictPartError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(StrictPartError, ValueError):
    """A vertex or edge id lies outside the domain of the object it was used with."""


class ParameterError(StrictPartError, ValueError):
    """An argument is out of range or a documented precondition does not hold."""


class SizeError(ParameterError):
    """The input is larger than a configured hard cap."""


class OracleMisbehavior(StrictPartError):
    """A user supplied routine broke its contract.

    ``witness`` holds whatever data shows the violation (sets, weights, targets).
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness or {}


class ContractViolation(StrictPartError, AssertionError):
    """A runtime guarantee check failed."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness or {}


class InternalInvariantError(ContractViolation):
    """An invariant that should be unreachable was broken."""
