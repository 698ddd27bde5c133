"""
Exception hierarchy for the multiplier engine.

The command-line front end maps these onto exit codes; library callers can
catch `KohnError` to handle every failure raised here.
"""
from typing import Optional


class KohnError(Exception):
    """Base class for every failure raised by the engine."""

    def __init__(self, message: str, procedure: Optional[str] = None):
        self.procedure = procedure
        if procedure:
            message = f"[{procedure}] {message}"
        super().__init__(message)


class DimensionError(KohnError, ValueError):
    """Mismatched variable counts, arities or indices."""


class ParseError(KohnError, ValueError):
    """Polynomial text or JSON that cannot be read."""


class DomainError(KohnError):
    """Input outside the algorithm's hypotheses (infinite multiplicity, radical failure, ...)."""


class NotInRadicalError(DomainError):
    """Certified non-membership of a power in an ideal."""

    def __init__(self, message: str, exponent: int, procedure: Optional[str] = None):
        self.exponent = exponent
        super().__init__(message, procedure)


class ResourceCapError(KohnError):
    """A configured degree, pair, digit or retry cap was exceeded."""


class VerificationError(KohnError):
    """A trace node or a worked-example check did not re-verify."""

    def __init__(self, message: str, node: Optional[int] = None, step: Optional[str] = None,
                 procedure: Optional[str] = None):
        self.node = node
        self.step = step
        super().__init__(message, procedure)
