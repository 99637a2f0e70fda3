"""Structured layer-precondition violations.

A violation carries a stable error code, the offending layer id, and an
expected/observed pair. The human-readable message is generated from a
per-code template so that identical codes always produce identical
templates; only the substituted numbers vary. Badness is the repair
feedback signal: severity times the numeric distance between expected
and observed (1 when either side is non-numeric), so partial progress
toward a satisfied precondition lowers the score before it reaches zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ErrorCode(Enum):
    E_DIM = "E_DIM"
    E_INPUT_SHAPE_INCONSISTENT = "E_INPUT_SHAPE_INCONSISTENT"
    E_KERNEL_TOO_LARGE = "E_KERNEL_TOO_LARGE"
    E_WEIGHT_SHAPE = "E_WEIGHT_SHAPE"
    E_AXIS_OOB = "E_AXIS_OOB"
    E_ARG_INVALID = "E_ARG_INVALID"
    E_EMPTY_OUTPUT = "E_EMPTY_OUTPUT"
    E_ARITY = "E_ARITY"


SEVERITY: dict[ErrorCode, int] = {
    ErrorCode.E_DIM: 10,
    ErrorCode.E_INPUT_SHAPE_INCONSISTENT: 6,
    ErrorCode.E_KERNEL_TOO_LARGE: 4,
    ErrorCode.E_WEIGHT_SHAPE: 2,
    ErrorCode.E_AXIS_OOB: 2,
    ErrorCode.E_ARG_INVALID: 2,
    ErrorCode.E_EMPTY_OUTPUT: 4,
    ErrorCode.E_ARITY: 8,
}

CATEGORY: dict[ErrorCode, str] = {
    ErrorCode.E_DIM: "Dimension Error",
    ErrorCode.E_INPUT_SHAPE_INCONSISTENT: "Inconsistent Input Shapes",
    ErrorCode.E_KERNEL_TOO_LARGE: "Argument Error",
    ErrorCode.E_WEIGHT_SHAPE: "Argument Error",
    ErrorCode.E_AXIS_OOB: "Argument Error",
    ErrorCode.E_ARG_INVALID: "Argument Error",
    ErrorCode.E_EMPTY_OUTPUT: "Argument Error",
    ErrorCode.E_ARITY: "Argument Error",
}

MESSAGE_TEMPLATE: dict[ErrorCode, str] = {
    ErrorCode.E_DIM: "rank mismatch: expected {expected}, observed {observed}",
    ErrorCode.E_INPUT_SHAPE_INCONSISTENT: (
        "inconsistent input shapes: expected extent {expected}, observed {observed}"
    ),
    ErrorCode.E_KERNEL_TOO_LARGE: (
        "window exceeds input: extent {expected}, window {observed}"
    ),
    ErrorCode.E_WEIGHT_SHAPE: (
        "weight shape mismatch: expected {expected}, observed {observed}"
    ),
    ErrorCode.E_AXIS_OOB: "axis out of bounds: max {expected}, observed {observed}",
    ErrorCode.E_ARG_INVALID: "invalid argument: expected {expected}, observed {observed}",
    ErrorCode.E_EMPTY_OUTPUT: (
        "empty output: expected extent {expected}, observed {observed}"
    ),
    ErrorCode.E_ARITY: "wrong input count: expected {expected}, observed {observed}",
}


@dataclass(frozen=True)
class PrecondViolation:
    code: ErrorCode
    layer_id: str
    expected: int | None = None
    observed: int | None = None
    detail: str = ""
    # Index of the input edge that triggered the violation, when known.
    # Repair uses it to pick a child; it is not part of the report schema.
    input_index: int | None = None

    @property
    def severity(self) -> int:
        return SEVERITY[self.code]

    @property
    def category(self) -> str:
        return CATEGORY[self.code]

    @property
    def message(self) -> str:
        exp = "?" if self.expected is None else str(self.expected)
        obs = "?" if self.observed is None else str(self.observed)
        return MESSAGE_TEMPLATE[self.code].format(expected=exp, observed=obs)

    @property
    def badness(self) -> int:
        if self.expected is None or self.observed is None:
            distance = 1
        else:
            distance = max(1, abs(int(self.expected) - int(self.observed)))
        return self.severity * distance

    def to_json(self) -> dict:
        doc = {
            "code": self.code.value,
            "category": self.category,
            "layer": self.layer_id,
            "message": self.message,
            "badness": self.badness,
            "expected": self.expected,
            "observed": self.observed,
        }
        if self.detail:
            doc["detail"] = self.detail
        return doc
