"""Per-kind shape inference and precondition checking.

`check_layer` is the single rule table: given a kind, its arguments, the
input shapes (batch first, batch may be None when symbolic) and optional
weights, it returns the output shape or the first precondition violation.
The validator, the evaluator and the fuzzer's feedback loop all call this
function, which is what keeps "validator accepts" and "evaluator succeeds"
equivalent by construction.

Check order within a node is fixed: arity, rank, argument validity,
geometry/shape compatibility, weights, empty output. "First violation"
therefore means the same thing everywhere.
"""

from __future__ import annotations

import math
from typing import Sequence

from .kinds import ACTIVATION_FNS, KIND_TABLE, LayerKind
from .violations import ErrorCode, PrecondViolation

Shape = tuple  # dims[0] may be None (symbolic batch); the rest are ints


def _dims_eq(a, b) -> bool:
    return a is None or b is None or a == b


def _has_empty(shape: Shape) -> bool:
    return any(d == 0 for d in shape[1:])


def _prod(dims: Sequence[int]) -> int:
    n = 1
    for d in dims:
        n *= d
    return n


def same_extent(extent: int, stride: int) -> int:
    """Output extent under same padding: ceil(extent / stride)."""
    return -(-extent // stride)


def valid_extent(extent: int, window: int, stride: int) -> int:
    """Output extent under valid padding; requires window <= extent."""
    return (extent - window) // stride + 1


def same_pad_before(extent: int, window: int, stride: int) -> int:
    """Left/top padding under same padding (extra goes after, not before)."""
    out = same_extent(extent, stride)
    total = max((out - 1) * stride + window - extent, 0)
    return total // 2


def expected_weight_shapes(kind: LayerKind, args: dict, in_shapes) -> list[tuple]:
    """Weight shapes implied by the layer's arguments and input shape."""
    if kind == LayerKind.DENSE:
        c = in_shapes[0][-1]
        u = args["units"]
        return [(c, u), (u,)]
    if kind == LayerKind.CONV1D:
        c = in_shapes[0][2]
        f = args["filters"]
        return [(args["kernel_size"], c, f), (f,)]
    if kind == LayerKind.CONV2D:
        c = in_shapes[0][3]
        f = args["filters"]
        kh, kw = args["kernel_size"]
        return [(kh, kw, c, f), (f,)]
    if kind == LayerKind.BATCHNORM:
        c = in_shapes[0][-1]
        return [(c,), (c,), (c,), (c,)]
    if kind == LayerKind.SIMPLERNN:
        c = in_shapes[0][2]
        u = args["units"]
        return [(c, u), (u, u), (u,)]
    return []


def _bad_arg(layer_id, expected=None, observed=None, detail=""):
    return PrecondViolation(
        ErrorCode.E_ARG_INVALID, layer_id, expected, observed, detail
    )


def _check_positive_int(layer_id, name, value, minimum=1):
    if value < minimum:
        return _bad_arg(layer_id, expected=minimum, observed=value, detail=name)
    return None


def _window_rule(layer_id, extent, window, stride, padding):
    """Returns (out_extent, violation)."""
    if padding == "same":
        return same_extent(extent, stride), None
    if window > extent:
        return None, PrecondViolation(
            ErrorCode.E_KERNEL_TOO_LARGE, layer_id, expected=extent, observed=window
        )
    return valid_extent(extent, window, stride), None


def _merge_batch(in_shapes):
    for s in in_shapes:
        if s[0] is not None:
            return s[0]
    return None


def _rule_merge(kind, args, in_shapes, layer_id):
    base = in_shapes[0]
    for i, s in enumerate(in_shapes[1:], start=1):
        if len(s) != len(base):
            return None, PrecondViolation(
                ErrorCode.E_DIM,
                layer_id,
                expected=len(base),
                observed=len(s),
                input_index=i,
            )
    if kind == LayerKind.CONCATENATE:
        axis = args["axis"]
        rank = len(base)
        if not 1 <= axis <= rank - 1:
            return None, PrecondViolation(
                ErrorCode.E_AXIS_OOB, layer_id, expected=rank - 1, observed=axis
            )
        for i, s in enumerate(in_shapes[1:], start=1):
            for d in range(rank):
                if d != axis and not _dims_eq(base[d], s[d]):
                    return None, PrecondViolation(
                        ErrorCode.E_INPUT_SHAPE_INCONSISTENT,
                        layer_id,
                        expected=base[d],
                        observed=s[d],
                        input_index=i,
                    )
        total = sum(s[axis] for s in in_shapes)
        out = list(base)
        out[0] = _merge_batch(in_shapes)
        out[axis] = total
        return tuple(out), None
    # elementwise merges need fully equal shapes
    for i, s in enumerate(in_shapes[1:], start=1):
        for d in range(len(base)):
            if not _dims_eq(base[d], s[d]):
                return None, PrecondViolation(
                    ErrorCode.E_INPUT_SHAPE_INCONSISTENT,
                    layer_id,
                    expected=base[d],
                    observed=s[d],
                    input_index=i,
                )
    out = list(base)
    out[0] = _merge_batch(in_shapes)
    return tuple(out), None


def _rule_unary(kind, args, in_shape, layer_id):
    """Shape rule for single-input kinds; rank already verified."""
    b = in_shape[0]

    if kind == LayerKind.DENSE:
        v = _check_positive_int(layer_id, "units", args["units"])
        if v:
            return None, v
        return in_shape[:-1] + (args["units"],), None

    if kind == LayerKind.CONV1D:
        for name in ("filters", "kernel_size", "strides"):
            v = _check_positive_int(layer_id, name, args[name])
            if v:
                return None, v
        out, v = _window_rule(
            layer_id, in_shape[1], args["kernel_size"], args["strides"], args["padding"]
        )
        if v:
            return None, v
        return (b, out, args["filters"]), None

    if kind == LayerKind.CONV2D:
        v = _check_positive_int(layer_id, "filters", args["filters"])
        if v:
            return None, v
        for name in ("kernel_size", "strides"):
            for x in args[name]:
                v = _check_positive_int(layer_id, name, x)
                if v:
                    return None, v
        dims = []
        for axis in (0, 1):
            out, v = _window_rule(
                layer_id,
                in_shape[1 + axis],
                args["kernel_size"][axis],
                args["strides"][axis],
                args["padding"],
            )
            if v:
                return None, v
            dims.append(out)
        return (b, dims[0], dims[1], args["filters"]), None

    if kind in (LayerKind.MAXPOOL1D, LayerKind.AVGPOOL1D):
        for name in ("pool_size", "strides"):
            v = _check_positive_int(layer_id, name, args[name])
            if v:
                return None, v
        out, v = _window_rule(
            layer_id, in_shape[1], args["pool_size"], args["strides"], args["padding"]
        )
        if v:
            return None, v
        return (b, out, in_shape[2]), None

    if kind in (LayerKind.MAXPOOL2D, LayerKind.AVGPOOL2D):
        for name in ("pool_size", "strides"):
            for x in args[name]:
                v = _check_positive_int(layer_id, name, x)
                if v:
                    return None, v
        dims = []
        for axis in (0, 1):
            out, v = _window_rule(
                layer_id,
                in_shape[1 + axis],
                args["pool_size"][axis],
                args["strides"][axis],
                args["padding"],
            )
            if v:
                return None, v
            dims.append(out)
        return (b, dims[0], dims[1], in_shape[3]), None

    if kind in (LayerKind.GLOBALMAXPOOL1D, LayerKind.GLOBALAVGPOOL1D):
        return (b, in_shape[2]), None

    if kind == LayerKind.FLATTEN:
        return (b, _prod(in_shape[1:])), None

    if kind == LayerKind.RESHAPE:
        target = args["target"]
        if not target:
            return None, _bad_arg(layer_id, detail="target must be non-empty")
        for d in target:
            if d < 1:
                return None, _bad_arg(layer_id, expected=1, observed=d, detail="target")
        have = _prod(in_shape[1:])
        want = _prod(target)
        if have != want:
            return None, _bad_arg(
                layer_id, expected=have, observed=want, detail="element count"
            )
        return (b,) + tuple(target), None

    if kind == LayerKind.PERMUTE:
        order = args["order"]
        r = len(in_shape)
        if len(order) != r - 1:
            return None, _bad_arg(
                layer_id, expected=r - 1, observed=len(order), detail="order length"
            )
        if sorted(order) != list(range(1, r)):
            return None, _bad_arg(layer_id, detail="order is not a permutation")
        return (b,) + tuple(in_shape[p] for p in order), None

    if kind == LayerKind.REPEATVECTOR:
        v = _check_positive_int(layer_id, "n", args["n"])
        if v:
            return None, v
        return (b, args["n"], in_shape[1]), None

    if kind == LayerKind.CROPPING1D:
        lo, hi = args["cropping"]
        for x in (lo, hi):
            if x < 0:
                return None, _bad_arg(layer_id, expected=0, observed=x, detail="cropping")
        steps = max(in_shape[1] - lo - hi, 0)
        return (b, steps, in_shape[2]), None

    if kind == LayerKind.CROPPING2D:
        top, bottom, left, right = args["cropping"]
        for x in (top, bottom, left, right):
            if x < 0:
                return None, _bad_arg(layer_id, expected=0, observed=x, detail="cropping")
        h = max(in_shape[1] - top - bottom, 0)
        w = max(in_shape[2] - left - right, 0)
        return (b, h, w, in_shape[3]), None

    if kind == LayerKind.ZEROPADDING1D:
        lo, hi = args["padding"]
        for x in (lo, hi):
            if x < 0:
                return None, _bad_arg(layer_id, expected=0, observed=x, detail="padding")
        return (b, in_shape[1] + lo + hi, in_shape[2]), None

    if kind == LayerKind.ZEROPADDING2D:
        top, bottom, left, right = args["padding"]
        for x in (top, bottom, left, right):
            if x < 0:
                return None, _bad_arg(layer_id, expected=0, observed=x, detail="padding")
        return (
            b,
            in_shape[1] + top + bottom,
            in_shape[2] + left + right,
            in_shape[3],
        ), None

    if kind == LayerKind.UPSAMPLING1D:
        v = _check_positive_int(layer_id, "size", args["size"])
        if v:
            return None, v
        return (b, in_shape[1] * args["size"], in_shape[2]), None

    if kind == LayerKind.UPSAMPLING2D:
        sh, sw = args["size"]
        for x in (sh, sw):
            v = _check_positive_int(layer_id, "size", x)
            if v:
                return None, v
        return (b, in_shape[1] * sh, in_shape[2] * sw, in_shape[3]), None

    if kind == LayerKind.RELU:
        slope = args["negative_slope"]
        threshold = args["threshold"]
        max_value = args["max_value"]
        if slope < 0:
            return None, _bad_arg(layer_id, detail="negative_slope must be >= 0")
        if max_value is not None:
            if max_value < 0:
                return None, _bad_arg(layer_id, detail="max_value must be >= 0")
            if max_value < threshold:
                return None, _bad_arg(layer_id, detail="max_value must be >= threshold")
        return in_shape, None

    if kind == LayerKind.ACTIVATION:
        if args["fn"] not in ACTIVATION_FNS:
            return None, _bad_arg(
                layer_id, detail=f"fn must be one of {'|'.join(ACTIVATION_FNS)}"
            )
        return in_shape, None

    if kind == LayerKind.BATCHNORM:
        if not args["epsilon"] > 0:
            return None, _bad_arg(layer_id, detail="epsilon must be > 0")
        return in_shape, None

    if kind == LayerKind.DROPOUT:
        rate = args["rate"]
        if not 0 <= rate < 1 or math.isnan(rate):
            return None, _bad_arg(layer_id, detail="rate must be in [0, 1)")
        return in_shape, None

    if kind == LayerKind.SIMPLERNN:
        v = _check_positive_int(layer_id, "units", args["units"])
        if v:
            return None, v
        return (b, args["units"]), None

    raise AssertionError(f"no shape rule for {kind}")


def check_layer(
    kind: LayerKind,
    args: dict,
    in_shapes: Sequence[Shape],
    weights: Sequence,
    layer_id: str,
    *,
    require_weights: bool = True,
) -> tuple[Shape | None, PrecondViolation | None]:
    """Check one layer's preconditions; returns (out_shape, violation).

    Exactly one of the pair is None. `weights` holds Tensor objects (or an
    empty sequence); with require_weights=False an empty sequence defers
    weight checking, which the fuzzer uses before weights are materialized.
    """
    spec = KIND_TABLE[kind]
    n = len(in_shapes)

    if not spec.arity_lo <= n <= spec.arity_hi:
        return None, PrecondViolation(
            ErrorCode.E_ARITY, layer_id, expected=spec.arity_lo, observed=n
        )
    if spec.semantic_arity is not None and n != spec.semantic_arity:
        return None, PrecondViolation(
            ErrorCode.E_ARITY, layer_id, expected=spec.semantic_arity, observed=n
        )

    if spec.exact_rank is not None:
        for i, s in enumerate(in_shapes):
            if len(s) != spec.exact_rank:
                return None, PrecondViolation(
                    ErrorCode.E_DIM,
                    layer_id,
                    expected=spec.exact_rank,
                    observed=len(s),
                    input_index=i,
                )
    else:
        for i, s in enumerate(in_shapes):
            if len(s) < 2:
                return None, PrecondViolation(
                    ErrorCode.E_DIM, layer_id, expected=2, observed=len(s), input_index=i
                )

    if spec.is_merge:
        out_shape, violation = _rule_merge(kind, args, in_shapes, layer_id)
    else:
        out_shape, violation = _rule_unary(kind, args, in_shapes[0], layer_id)
    if violation:
        return None, violation

    if spec.n_weights:
        if len(weights) == 0:
            if require_weights:
                return None, PrecondViolation(
                    ErrorCode.E_WEIGHT_SHAPE,
                    layer_id,
                    expected=spec.n_weights,
                    observed=0,
                    detail="missing weights",
                )
        else:
            expected = expected_weight_shapes(kind, args, in_shapes)
            if len(weights) != len(expected):
                return None, PrecondViolation(
                    ErrorCode.E_WEIGHT_SHAPE,
                    layer_id,
                    expected=spec.n_weights,
                    observed=len(weights),
                    detail="weight count",
                )
            for i, (w, exp) in enumerate(zip(weights, expected)):
                got = w.shape
                if len(got) != len(exp):
                    return None, PrecondViolation(
                        ErrorCode.E_WEIGHT_SHAPE,
                        layer_id,
                        expected=len(exp),
                        observed=len(got),
                        detail=f"weight {i} rank",
                    )
                for e, g in zip(exp, got):
                    if e != g:
                        return None, PrecondViolation(
                            ErrorCode.E_WEIGHT_SHAPE,
                            layer_id,
                            expected=e,
                            observed=g,
                            detail=f"weight {i}",
                        )

    if _has_empty(out_shape) and not any(_has_empty(s) for s in in_shapes):
        return None, PrecondViolation(
            ErrorCode.E_EMPTY_OUTPUT, layer_id, expected=1, observed=0
        )
    return out_shape, None
