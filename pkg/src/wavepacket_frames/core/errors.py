"""
Exception types raised by the numerical core.

Every error derives from ``WavepacketError`` and from the builtin that best
describes it, so callers may catch either.
"""
from typing import Optional


class WavepacketError(Exception):
    """Base class for all toolkit errors."""


class DegenerateSystemError(WavepacketError, ValueError):
    """The corrector moment system is singular or too ill-conditioned to solve."""


class PreconditionError(WavepacketError, ValueError):
    """An operation was called outside the regime where its result is meaningful."""


class TruncationError(WavepacketError, RuntimeError):
    """A truncated sum could not be certified at the requested radius."""

    def __init__(self, message: str, required_radius: Optional[float] = None):
        super().__init__(message)
        self.required_radius = required_radius


class FormatError(WavepacketError, ValueError):
    """An input file violates its format; ``offset`` is the offending byte position."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
