"""Exception hierarchy shared across the package."""

from __future__ import annotations

__all__ = [
    "SkorokhodError",
    "EmptyMeasure",
    "NegativeWeight",
    "InvalidSplit",
    "MeanSignError",
    "NoCrossing",
    "UnboundedSegment",
    "InvalidStep",
    "NoSamples",
    "WrongOrientation",
    "QuadratureOverflow",
    "DomainExit",
    "OutOfRange",
    "ExprSyntaxError",
    "DomainError",
    "ConfigError",
    "Infeasible",
]


class SkorokhodError(Exception):
    """Base class for all package errors."""


class EmptyMeasure(SkorokhodError, ValueError):
    """A measure was built from no atoms."""


class NegativeWeight(SkorokhodError, ValueError):
    """An atom weight was zero, negative or not finite."""


class InvalidSplit(SkorokhodError, ValueError):
    """A quantile split was requested with inconsistent (p, u)."""


class MeanSignError(SkorokhodError, ValueError):
    """The construction requires a target mean of the other sign."""


class NoCrossing(SkorokhodError, ValueError):
    """The defining set of the modulus slope is empty."""


class UnboundedSegment(SkorokhodError, RuntimeError):
    """An exit segment is unbounded on both sides."""


class InvalidStep(SkorokhodError, ValueError):
    """A time step or horizon is not strictly positive."""


class NoSamples(SkorokhodError, ValueError):
    """A statistic was requested on an empty (or fully censored) sample."""


class WrongOrientation(SkorokhodError, ValueError):
    """A one-sided diagnostic was requested against the sign of the mean."""


class QuadratureOverflow(SkorokhodError, OverflowError):
    """The scale density overflowed the floating point range.

    Parameters
    ----------
    x : float
        Abscissa at which the exponent left the representable range.
    """

    def __init__(self, x: float):
        self.x = float(x)
        super().__init__(f"scale density overflows at x = {self.x!r}")


class DomainExit(SkorokhodError, RuntimeError):
    """A diffusion path left the tabulated domain of the scale function."""


class OutOfRange(SkorokhodError, ValueError):
    """A value lies outside the tabulated range of a monotone table."""


class ExprSyntaxError(SkorokhodError, ValueError):
    """Malformed expression text.

    Parameters
    ----------
    message : str
        Human readable description, usually ``"expected ..."``.
    offset : int
        Zero-based byte offset into the source text.
    text : str
        The source text.
    """

    def __init__(self, message: str, offset: int, text: str = ""):
        self.message = message
        self.offset = int(offset)
        self.text = text
        super().__init__(f"{message} at offset {self.offset}")


class DomainError(SkorokhodError, ArithmeticError):
    """An expression was evaluated outside its domain."""


class ConfigError(SkorokhodError, ValueError):
    """Invalid or incomplete experiment configuration."""


class Infeasible(SkorokhodError, ValueError):
    """The requested target cannot be embedded by the given process."""
