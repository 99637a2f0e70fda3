"""Dense float64 tensors with explicit shapes.

The reference semantics computes everything in float64 and never relies
on implicit broadcasting: every operation here takes and returns whole
tensors with fully known shapes, and raises a typed error instead of
letting numpy guess. Zero-sized axes are legal values (validation flags
them separately); NaN and infinities are legal values too and are only
given special meaning by approx_equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AxisOutOfRange,
    BoundsInvalid,
    ElementCountMismatch,
    RankMismatch,
    ShapeMismatch,
)

Shape = tuple[int, ...]


def element_count(shape: Sequence[int]) -> int:
    n = 1
    for d in shape:
        n *= d
    return n


def fmt_float(x: float) -> str:
    """Canonical decimal text for a float.

    Integral values below 2**53 print without a fraction so canonical
    documents stay stable and readable; everything else uses the shortest
    representation that round-trips exactly.
    """
    if x != x:
        return "NaN"
    if x == math.inf:
        return "Infinity"
    if x == -math.inf:
        return "-Infinity"
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


class Tensor:
    """Immutable-by-convention dense float64 tensor, rank >= 1."""

    __slots__ = ("_shape", "_data")

    def __init__(self, shape: Sequence[int], values: Iterable[float] | np.ndarray):
        shape = tuple(int(d) for d in shape)
        if len(shape) == 0:
            raise RankMismatch("tensor rank must be >= 1")
        for d in shape:
            if d < 0:
                raise BoundsInvalid(f"negative dimension in shape {shape}")
        data = np.asarray(values, dtype=np.float64).reshape(-1)
        if data.size != element_count(shape):
            raise ElementCountMismatch(
                f"shape {shape} needs {element_count(shape)} values, got {data.size}"
            )
        self._shape = shape
        self._data = data

    # --- constructors ---

    @classmethod
    def filled(cls, shape: Sequence[int], value: float) -> "Tensor":
        shape = tuple(int(d) for d in shape)
        return cls(shape, np.full(element_count(shape), float(value)))

    @classmethod
    def from_nd(cls, array: np.ndarray) -> "Tensor":
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 0:
            raise RankMismatch("tensor rank must be >= 1")
        return cls(array.shape, array.reshape(-1))

    @classmethod
    def from_nested(cls, obj) -> "Tensor":
        """Build from nested lists; depth defines rank, must be rectangular."""
        if not isinstance(obj, (list, tuple)):
            raise RankMismatch("nested tensor value must be a list")
        try:
            array = np.asarray(obj, dtype=np.float64)
        except (ValueError, TypeError) as exc:
            raise ShapeMismatch(f"ragged or non-numeric nested value: {exc}") from None
        if array.dtype != np.float64:  # e.g. object arrays that slipped through
            raise ShapeMismatch("non-numeric nested value")
        return cls.from_nd(array)

    # --- views ---

    @property
    def shape(self) -> Shape:
        return self._shape

    @property
    def rank(self) -> int:
        return len(self._shape)

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def nd(self) -> np.ndarray:
        """N-d numpy view; treat as read-only."""
        return self._data.reshape(self._shape)

    def to_nested(self):
        return self.nd.tolist()

    def item(self, *index: int) -> float:
        return float(self.nd[tuple(index)])

    # --- comparison / display ---

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self._shape == other._shape and bool(np.all(self._data == other._data))

    def __hash__(self):
        raise TypeError("Tensor is not hashable")

    def __repr__(self) -> str:
        flat = self._data
        if flat.size <= 8:
            body = ", ".join(fmt_float(float(v)) for v in flat)
        else:
            body = ", ".join(fmt_float(float(v)) for v in flat[:8]) + ", ..."
        return f"Tensor(shape={self._shape}, [{body}])"


def reshape(t: Tensor, new_shape: Sequence[int]) -> Tensor:
    """Row-major reshape; element order is preserved exactly."""
    new_shape = tuple(int(d) for d in new_shape)
    if element_count(new_shape) != t.size:
        raise ElementCountMismatch(
            f"cannot reshape {t.shape} ({t.size} elements) to {new_shape} "
            f"({element_count(new_shape)} elements)"
        )
    return Tensor(new_shape, t.nd.reshape(-1))


def slice_axis(t: Tensor, axis: int, start: int, stop: int) -> Tensor:
    if not 0 <= axis < t.rank:
        raise AxisOutOfRange(f"axis {axis} out of range for rank {t.rank}")
    dim = t.shape[axis]
    if not 0 <= start <= stop <= dim:
        raise BoundsInvalid(f"slice [{start}:{stop}] invalid for axis of size {dim}")
    idx = [slice(None)] * t.rank
    idx[axis] = slice(start, stop)
    return Tensor.from_nd(t.nd[tuple(idx)])


def pad_axis(t: Tensor, axis: int, before: int, after: int, value: float = 0.0) -> Tensor:
    if not 0 <= axis < t.rank:
        raise AxisOutOfRange(f"axis {axis} out of range for rank {t.rank}")
    if before < 0 or after < 0:
        raise BoundsInvalid(f"negative padding ({before}, {after})")
    widths = [(0, 0)] * t.rank
    widths[axis] = (before, after)
    return Tensor.from_nd(np.pad(t.nd, widths, constant_values=float(value)))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise BoundsInvalid("concat needs at least one tensor")
    rank = tensors[0].rank
    for t in tensors[1:]:
        if t.rank != rank:
            raise RankMismatch(f"concat rank mismatch: {rank} vs {t.rank}")
    if not 0 <= axis < rank:
        raise AxisOutOfRange(f"axis {axis} out of range for rank {rank}")
    ref = tensors[0].shape
    for t in tensors[1:]:
        for d in range(rank):
            if d != axis and t.shape[d] != ref[d]:
                raise ShapeMismatch(
                    f"concat dim {d} mismatch: {ref[d]} vs {t.shape[d]}"
                )
    return Tensor.from_nd(np.concatenate([t.nd for t in tensors], axis=axis))


@dataclass(frozen=True)
class ComparisonStats:
    """Result of an elementwise tolerance comparison."""

    passed: bool
    shapes_equal: bool
    count: int
    mismatch_count: int
    max_abs_diff: float
    max_rel_diff: float

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "shapes_equal": self.shapes_equal,
            "count": self.count,
            "mismatch_count": self.mismatch_count,
            "max_abs_diff": self.max_abs_diff,
            "max_rel_diff": self.max_rel_diff,
        }


def approx_equal(
    a: Tensor,
    b: Tensor,
    rtol: float = 1e-4,
    atol: float = 1e-6,
    nan_equal: bool = False,
) -> ComparisonStats:
    """Elementwise |a-b| <= atol + rtol*|b|; b is the reference side.

    Equal infinities of the same sign match exactly; NaN matches only NaN
    and only when nan_equal is set. Shape mismatch fails without
    elementwise stats.
    """
    if a.shape != b.shape:
        return ComparisonStats(
            passed=False,
            shapes_equal=False,
            count=0,
            mismatch_count=0,
            max_abs_diff=math.inf,
            max_rel_diff=math.inf,
        )
    x = a.nd.reshape(-1)
    y = b.nd.reshape(-1)
    n = x.size
    if n == 0:
        return ComparisonStats(True, True, 0, 0, 0.0, 0.0)

    nan_x = np.isnan(x)
    nan_y = np.isnan(y)
    both_nan = nan_x & nan_y
    any_nan = nan_x | nan_y
    exact = (x == y) & ~any_nan  # covers equal infinities of equal sign
    if nan_equal:
        exact = exact | both_nan

    with np.errstate(invalid="ignore"):
        diff = np.abs(x - y)
        scale = np.abs(y)
        within = diff <= atol + rtol * scale
    # tolerance only bridges finite values; infinities must match exactly
    finite = np.isfinite(x) & np.isfinite(y)
    ok = exact | (within & finite)

    mism = int(np.count_nonzero(~ok))
    eff_diff = np.where(exact, 0.0, diff)
    eff_diff = np.where(np.isnan(eff_diff), np.inf, eff_diff)
    max_abs = float(np.max(eff_diff))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, eff_diff / scale, np.where(eff_diff > 0, np.inf, 0.0))
        rel = np.where(np.isnan(rel), np.inf, rel)
    max_rel = float(np.max(rel))
    return ComparisonStats(
        passed=mism == 0,
        shapes_equal=True,
        count=n,
        mismatch_count=mism,
        max_abs_diff=max_abs,
        max_rel_diff=max_rel,
    )
