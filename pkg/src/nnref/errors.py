"""Exception types shared across the package."""

from __future__ import annotations


class NnrefError(Exception):
    """Base class for every error raised by this package."""


# --- tensor operations ---

class ElementCountMismatch(NnrefError):
    pass


class AxisOutOfRange(NnrefError):
    pass


class BoundsInvalid(NnrefError):
    pass


class RankMismatch(NnrefError):
    pass


class ShapeMismatch(NnrefError):
    pass


# --- model documents ---

class MalformedDocument(NnrefError):
    pass


class UnknownKind(NnrefError):
    pass


class BadArity(NnrefError):
    pass


class CycleDetected(NnrefError):
    pass


class DanglingEdge(NnrefError):
    pass


# --- layer rules ---

class WeightShapeMismatch(NnrefError):
    pass


class KernelTooLarge(NnrefError):
    pass


class DimensionError(NnrefError):
    pass


class BadArgument(NnrefError):
    pass


class BadPermutation(NnrefError):
    pass


class CountMismatch(NnrefError):
    pass


# --- generation and differential harness ---

class EmptyPalette(NnrefError):
    pass


class UnsupportedKind(NnrefError):
    pass


class BackendLaunchFailure(NnrefError):
    pass


class Unlocalizable(NnrefError):
    pass


class PrecondViolationError(NnrefError):
    """Raised by eval_model when a layer precondition fails.

    Carries the structured violation so callers can report code, layer id
    and badness without parsing the message.
    """

    def __init__(self, violation):
        super().__init__(f"{violation.layer_id}: {violation.message}")
        self.violation = violation
