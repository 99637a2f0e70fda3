"""Executable reference semantics for every supported layer kind.

All arithmetic is float64. Where the result depends on floating-point
evaluation order (convolution, pooling sums, dense products, merges),
the order is pinned and documented: bias first, then window positions in
row-major order, then input channels ascending, one addition per term.
The naive oracle in the test suite follows the identical order, so the
two agree exactly, not merely within tolerance.

Stochastic layers (Dropout) evaluate as identity here; their behaviour
on a backend is checked statistically by `check_stochastic`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    BadArgument,
    BadPermutation,
    CountMismatch,
    DimensionError,
    ElementCountMismatch,
    KernelTooLarge,
    MalformedDocument,
    PrecondViolationError,
    ShapeMismatch,
    WeightShapeMismatch,
)
from .ir import ModelGraph, topo_order
from .kinds import ACTIVATION_FNS, LayerKind
from .shapes import check_layer, same_extent, same_pad_before, valid_extent
from .tensor import Tensor, concat
from .violations import ErrorCode, PrecondViolation

__all__ = [
    "EvalResult",
    "StochasticCheckConfig",
    "StochasticCheckReport",
    "check_stochastic",
    "eval_activation",
    "eval_batchnorm",
    "eval_conv1d",
    "eval_conv2d",
    "eval_cropping1d",
    "eval_cropping2d",
    "eval_dense",
    "eval_flatten",
    "eval_global_pool1d",
    "eval_merge",
    "eval_model",
    "eval_node",
    "eval_permute",
    "eval_pool1d",
    "eval_pool2d",
    "eval_relu",
    "eval_repeat_vector",
    "eval_reshape",
    "eval_simple_rnn",
    "eval_upsampling1d",
    "eval_upsampling2d",
    "eval_zeropadding1d",
    "eval_zeropadding2d",
]


def _require_padding(padding: str) -> None:
    if padding not in ("valid", "same"):
        raise BadArgument(f"padding must be valid|same, got {padding!r}")


def _pad_same_1d(x: np.ndarray, window: int, stride: int) -> tuple[np.ndarray, int]:
    """Zero-pad the steps axis for same padding; returns (padded, out_extent)."""
    extent = x.shape[1]
    out = same_extent(extent, stride)
    total = max((out - 1) * stride + window - extent, 0)
    before = total // 2
    after = total - before
    if total:
        x = np.pad(x, ((0, 0), (before, after), (0, 0)))
    return x, out


# --- weighted layers ---


def eval_dense(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """out[..., u] = bias[u] + sum_i x[..., i] * kernel[i, u], i ascending."""
    if x.rank < 2:
        raise DimensionError(f"dense input must have rank >= 2, got {x.rank}")
    if kernel.rank != 2:
        raise WeightShapeMismatch(f"kernel must be rank 2, got {kernel.rank}")
    cin, units = kernel.shape
    if x.shape[-1] != cin:
        raise WeightShapeMismatch(
            f"kernel expects {cin} input features, input has {x.shape[-1]}"
        )
    if bias.shape != (units,):
        raise WeightShapeMismatch(
            f"bias length {bias.shape[0]} does not match units {units}"
        )
    xv = x.nd
    out = np.empty(x.shape[:-1] + (units,), dtype=np.float64)
    out[...] = bias.nd
    for i in range(cin):
        out += xv[..., i : i + 1] * kernel.nd[i]
    return Tensor.from_nd(out)


def eval_conv1d(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor,
    strides: int = 1,
    padding: str = "valid",
) -> Tensor:
    """1-D cross-correlation; accumulation order: bias, then (k, c) ascending."""
    if x.rank != 3:
        raise DimensionError(f"conv1d input must have rank 3, got {x.rank}")
    if kernel.rank != 3:
        raise WeightShapeMismatch(f"kernel must be rank 3, got {kernel.rank}")
    _require_padding(padding)
    if strides < 1:
        raise BadArgument(f"strides must be >= 1, got {strides}")
    b, steps, cin = x.shape
    k, kc, filters = kernel.shape
    if kc != cin:
        raise WeightShapeMismatch(f"kernel expects {kc} channels, input has {cin}")
    if bias.shape != (filters,):
        raise WeightShapeMismatch(
            f"bias length {bias.shape[0]} does not match filters {filters}"
        )
    xv = x.nd
    if padding == "same":
        xv, out_steps = _pad_same_1d(xv, k, strides)
    else:
        if k > steps:
            raise KernelTooLarge(f"kernel {k} exceeds input extent {steps}")
        out_steps = valid_extent(steps, k, strides)
    out = np.empty((b, out_steps, filters), dtype=np.float64)
    out[...] = bias.nd
    span = (out_steps - 1) * strides + 1
    for kk in range(k):
        tap = xv[:, kk : kk + span : strides, :]
        w = kernel.nd[kk]
        for c in range(cin):
            out += tap[:, :, c : c + 1] * w[c]
    return Tensor.from_nd(out)


def eval_conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor,
    strides: Sequence[int] = (1, 1),
    padding: str = "valid",
) -> Tensor:
    """2-D cross-correlation; order: bias, then (kh, kw, c) row-major."""
    if x.rank != 4:
        raise DimensionError(f"conv2d input must have rank 4, got {x.rank}")
    if kernel.rank != 4:
        raise WeightShapeMismatch(f"kernel must be rank 4, got {kernel.rank}")
    _require_padding(padding)
    sh, sw = strides
    if sh < 1 or sw < 1:
        raise BadArgument(f"strides must be >= 1, got {strides}")
    b, h, w, cin = x.shape
    kh, kw, kc, filters = kernel.shape
    if kc != cin:
        raise WeightShapeMismatch(f"kernel expects {kc} channels, input has {cin}")
    if bias.shape != (filters,):
        raise WeightShapeMismatch(
            f"bias length {bias.shape[0]} does not match filters {filters}"
        )
    xv = x.nd
    if padding == "same":
        oh = same_extent(h, sh)
        ow = same_extent(w, sw)
        th = max((oh - 1) * sh + kh - h, 0)
        tw = max((ow - 1) * sw + kw - w, 0)
        if th or tw:
            xv = np.pad(
                xv, ((0, 0), (th // 2, th - th // 2), (tw // 2, tw - tw // 2), (0, 0))
            )
    else:
        if kh > h:
            raise KernelTooLarge(f"kernel {kh} exceeds input extent {h}")
        if kw > w:
            raise KernelTooLarge(f"kernel {kw} exceeds input extent {w}")
        oh = valid_extent(h, kh, sh)
        ow = valid_extent(w, kw, sw)
    out = np.empty((b, oh, ow, filters), dtype=np.float64)
    out[...] = bias.nd
    span_h = (oh - 1) * sh + 1
    span_w = (ow - 1) * sw + 1
    for ih in range(kh):
        rows = xv[:, ih : ih + span_h : sh, :, :]
        for iw in range(kw):
            tap = rows[:, :, iw : iw + span_w : sw, :]
            wmat = kernel.nd[ih, iw]
            for c in range(cin):
                out += tap[:, :, :, c : c + 1] * wmat[c]
    return Tensor.from_nd(out)


def eval_batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    mean: Tensor,
    variance: Tensor,
    epsilon: float = 1e-3,
) -> Tensor:
    """Inference-mode normalization over the last axis."""
    if x.rank < 2:
        raise DimensionError(f"batchnorm input must have rank >= 2, got {x.rank}")
    if not epsilon > 0:
        raise BadArgument(f"epsilon must be > 0, got {epsilon}")
    c = x.shape[-1]
    for name, t in (("gamma", gamma), ("beta", beta), ("mean", mean), ("variance", variance)):
        if t.shape != (c,):
            raise WeightShapeMismatch(f"{name} must have shape ({c},), got {t.shape}")
    with np.errstate(invalid="ignore"):  # negative variance yields NaN
        out = gamma.nd * (x.nd - mean.nd) / np.sqrt(variance.nd + epsilon) + beta.nd
    return Tensor.from_nd(out)


def eval_simple_rnn(
    x: Tensor, kernel: Tensor, recurrent: Tensor, bias: Tensor
) -> Tensor:
    """tanh RNN over the steps axis, returning the final hidden state."""
    if x.rank != 3:
        raise DimensionError(f"rnn input must have rank 3, got {x.rank}")
    b, steps, cin = x.shape
    if kernel.rank != 2 or kernel.shape[0] != cin:
        raise WeightShapeMismatch(
            f"kernel must have shape ({cin}, units), got {kernel.shape}"
        )
    units = kernel.shape[1]
    if recurrent.shape != (units, units):
        raise WeightShapeMismatch(
            f"recurrent must have shape ({units}, {units}), got {recurrent.shape}"
        )
    if bias.shape != (units,):
        raise WeightShapeMismatch(
            f"bias length {bias.shape[0]} does not match units {units}"
        )
    h = np.zeros((b, units), dtype=np.float64)
    for t in range(steps):
        h = np.tanh(x.nd[:, t, :] @ kernel.nd + h @ recurrent.nd + bias.nd)
    return Tensor.from_nd(h)


# --- pooling ---


def eval_pool1d(
    x: Tensor,
    pool_size: int,
    strides: int = 1,
    padding: str = "valid",
    mode: str = "max",
) -> Tensor:
    """Windowed max/average over the steps axis.

    Under same padding, out-of-range taps are skipped entirely: averages
    divide by the in-range tap count and maxima ignore missing taps.
    Every window contains at least one in-range tap.
    """
    if x.rank != 3:
        raise DimensionError(f"pool1d input must have rank 3, got {x.rank}")
    _require_padding(padding)
    if mode not in ("max", "avg"):
        raise BadArgument(f"mode must be max|avg, got {mode!r}")
    if pool_size < 1 or strides < 1:
        raise BadArgument(f"pool_size/strides must be >= 1")
    b, steps, c = x.shape
    if padding == "same":
        out_steps = same_extent(steps, strides)
        before = same_pad_before(steps, pool_size, strides)
    else:
        if pool_size > steps:
            raise KernelTooLarge(f"pool {pool_size} exceeds input extent {steps}")
        out_steps = valid_extent(steps, pool_size, strides)
        before = 0
    starts = np.arange(out_steps) * strides - before
    xv = x.nd
    if mode == "max":
        out = np.full((b, out_steps, c), -np.inf)
        for k in range(pool_size):
            idx = starts + k
            m = (idx >= 0) & (idx < steps)
            if not m.any():
                continue
            out[:, m, :] = np.maximum(out[:, m, :], xv[:, idx[m], :])
        return Tensor.from_nd(out)
    acc = np.zeros((b, out_steps, c), dtype=np.float64)
    cnt = np.zeros(out_steps, dtype=np.int64)
    for k in range(pool_size):
        idx = starts + k
        m = (idx >= 0) & (idx < steps)
        if not m.any():
            continue
        acc[:, m, :] += xv[:, idx[m], :]
        cnt[m] += 1
    return Tensor.from_nd(acc / cnt[None, :, None])


def eval_pool2d(
    x: Tensor,
    pool_size: Sequence[int],
    strides: Sequence[int] = (1, 1),
    padding: str = "valid",
    mode: str = "max",
) -> Tensor:
    """Windowed max/average over the two spatial axes; see eval_pool1d."""
    if x.rank != 4:
        raise DimensionError(f"pool2d input must have rank 4, got {x.rank}")
    _require_padding(padding)
    if mode not in ("max", "avg"):
        raise BadArgument(f"mode must be max|avg, got {mode!r}")
    ph, pw = pool_size
    sh, sw = strides
    if min(ph, pw, sh, sw) < 1:
        raise BadArgument("pool_size/strides must be >= 1")
    b, h, w, c = x.shape
    if padding == "same":
        oh, ow = same_extent(h, sh), same_extent(w, sw)
        bh, bw = same_pad_before(h, ph, sh), same_pad_before(w, pw, sw)
    else:
        if ph > h:
            raise KernelTooLarge(f"pool {ph} exceeds input extent {h}")
        if pw > w:
            raise KernelTooLarge(f"pool {pw} exceeds input extent {w}")
        oh, ow = valid_extent(h, ph, sh), valid_extent(w, pw, sw)
        bh = bw = 0
    starts_h = np.arange(oh) * sh - bh
    starts_w = np.arange(ow) * sw - bw
    xv = x.nd
    is_max = mode == "max"
    if is_max:
        out = np.full((b, oh, ow, c), -np.inf)
    else:
        out = np.zeros((b, oh, ow, c), dtype=np.float64)
        cnt = np.zeros((oh, ow), dtype=np.int64)
    for kh in range(ph):
        idx_h = starts_h + kh
        mh = (idx_h >= 0) & (idx_h < h)
        if not mh.any():
            continue
        rows_out = np.nonzero(mh)[0]
        rows_in = idx_h[mh]
        for kw in range(pw):
            idx_w = starts_w + kw
            mw = (idx_w >= 0) & (idx_w < w)
            if not mw.any():
                continue
            cols_out = np.nonzero(mw)[0]
            cols_in = idx_w[mw]
            dest = np.ix_(np.arange(b), rows_out, cols_out, np.arange(c))
            src = np.ix_(np.arange(b), rows_in, cols_in, np.arange(c))
            if is_max:
                out[dest] = np.maximum(out[dest], xv[src])
            else:
                out[dest] += xv[src]
                cnt[np.ix_(rows_out, cols_out)] += 1
    if is_max:
        return Tensor.from_nd(out)
    return Tensor.from_nd(out / cnt[None, :, :, None])


def eval_global_pool1d(x: Tensor, mode: str = "max") -> Tensor:
    """Max/average over the whole steps axis; drops that axis."""
    if x.rank != 3:
        raise DimensionError(f"global pool input must have rank 3, got {x.rank}")
    if mode not in ("max", "avg"):
        raise BadArgument(f"mode must be max|avg, got {mode!r}")
    b, steps, c = x.shape
    if steps < 1:
        raise BadArgument("global pool needs a non-empty steps axis")
    xv = x.nd
    if mode == "max":
        out = xv[:, 0, :].copy()
        for t in range(1, steps):
            out = np.maximum(out, xv[:, t, :])
        return Tensor.from_nd(out)
    acc = np.zeros((b, c), dtype=np.float64)
    for t in range(steps):
        acc += xv[:, t, :]
    return Tensor.from_nd(acc / steps)


# --- merges ---


def eval_merge(kind: str, tensors: Sequence[Tensor], axis: int | None = None) -> Tensor:
    """Elementwise merges and concatenation.

    Elementwise kinds fold left over the operand list, so the addition
    order is the operand order.
    """
    if len(tensors) < 2:
        raise CountMismatch(f"merge needs >= 2 operands, got {len(tensors)}")
    if kind == "concatenate":
        if axis is None:
            raise BadArgument("concatenate needs an axis")
        return concat(list(tensors), axis)
    base = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != base:
            raise ShapeMismatch(f"merge shape mismatch: {base} vs {t.shape}")
    if kind == "subtract":
        if len(tensors) != 2:
            raise CountMismatch(f"subtract takes exactly 2 operands, got {len(tensors)}")
        return Tensor.from_nd(tensors[0].nd - tensors[1].nd)
    acc = tensors[0].nd.copy()
    if kind == "add":
        for t in tensors[1:]:
            acc = acc + t.nd
    elif kind == "multiply":
        for t in tensors[1:]:
            acc = acc * t.nd
    elif kind == "average":
        for t in tensors[1:]:
            acc = acc + t.nd
        acc = acc / len(tensors)
    elif kind == "maximum":
        for t in tensors[1:]:
            acc = np.maximum(acc, t.nd)
    elif kind == "minimum":
        for t in tensors[1:]:
            acc = np.minimum(acc, t.nd)
    else:
        raise BadArgument(f"unknown merge kind {kind!r}")
    return Tensor.from_nd(acc)


# --- shape and resize ops ---


def eval_flatten(x: Tensor) -> Tensor:
    if x.rank < 2:
        raise DimensionError(f"flatten input must have rank >= 2, got {x.rank}")
    n = 1
    for d in x.shape[1:]:
        n *= d
    return Tensor(x.shape[:1] + (n,), x.nd.reshape(-1))


def eval_reshape(x: Tensor, target: Sequence[int]) -> Tensor:
    target = tuple(int(d) for d in target)
    n = 1
    for d in x.shape[1:]:
        n *= d
    m = 1
    for d in target:
        m *= d
    if n != m:
        raise ElementCountMismatch(
            f"cannot reshape {x.shape[1:]} ({n} elements) to {target} ({m} elements)"
        )
    return Tensor(x.shape[:1] + target, x.nd.reshape(-1))


def eval_permute(x: Tensor, order: Sequence[int]) -> Tensor:
    order = tuple(int(p) for p in order)
    if sorted(order) != list(range(1, x.rank)):
        raise BadPermutation(f"order {order} is not a permutation of 1..{x.rank - 1}")
    return Tensor.from_nd(np.transpose(x.nd, (0,) + order))


def eval_repeat_vector(x: Tensor, n: int) -> Tensor:
    if x.rank != 2:
        raise DimensionError(f"repeat_vector input must have rank 2, got {x.rank}")
    if n < 1:
        raise BadArgument(f"n must be >= 1, got {n}")
    return Tensor.from_nd(np.repeat(x.nd[:, None, :], n, axis=1))


def eval_cropping1d(x: Tensor, begin: int, end: int) -> Tensor:
    if x.rank != 3:
        raise DimensionError(f"cropping1d input must have rank 3, got {x.rank}")
    if begin < 0 or end < 0:
        raise BadArgument(f"cropping must be >= 0, got ({begin}, {end})")
    steps = x.shape[1]
    keep = max(steps - begin - end, 0)
    start = min(begin, steps)
    return Tensor.from_nd(x.nd[:, start : start + keep, :])


def eval_cropping2d(x: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    if x.rank != 4:
        raise DimensionError(f"cropping2d input must have rank 4, got {x.rank}")
    if min(top, bottom, left, right) < 0:
        raise BadArgument("cropping must be >= 0")
    h, w = x.shape[1], x.shape[2]
    keep_h = max(h - top - bottom, 0)
    keep_w = max(w - left - right, 0)
    sh = min(top, h)
    sw = min(left, w)
    return Tensor.from_nd(x.nd[:, sh : sh + keep_h, sw : sw + keep_w, :])


def eval_zeropadding1d(x: Tensor, begin: int, end: int) -> Tensor:
    if x.rank != 3:
        raise DimensionError(f"zeropadding1d input must have rank 3, got {x.rank}")
    if begin < 0 or end < 0:
        raise BadArgument(f"padding must be >= 0, got ({begin}, {end})")
    return Tensor.from_nd(np.pad(x.nd, ((0, 0), (begin, end), (0, 0))))


def eval_zeropadding2d(x: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    if x.rank != 4:
        raise DimensionError(f"zeropadding2d input must have rank 4, got {x.rank}")
    if min(top, bottom, left, right) < 0:
        raise BadArgument("padding must be >= 0")
    return Tensor.from_nd(np.pad(x.nd, ((0, 0), (top, bottom), (left, right), (0, 0))))


def eval_upsampling1d(x: Tensor, size: int) -> Tensor:
    if x.rank != 3:
        raise DimensionError(f"upsampling1d input must have rank 3, got {x.rank}")
    if size < 1:
        raise BadArgument(f"size must be >= 1, got {size}")
    return Tensor.from_nd(np.repeat(x.nd, size, axis=1))


def eval_upsampling2d(x: Tensor, size_h: int, size_w: int) -> Tensor:
    if x.rank != 4:
        raise DimensionError(f"upsampling2d input must have rank 4, got {x.rank}")
    if size_h < 1 or size_w < 1:
        raise BadArgument(f"size must be >= 1, got ({size_h}, {size_w})")
    return Tensor.from_nd(np.repeat(np.repeat(x.nd, size_h, axis=1), size_w, axis=2))


# --- activations ---


def eval_relu(
    x: Tensor,
    negative_slope: float = 0.0,
    max_value: float | None = None,
    threshold: float = 0.0,
) -> Tensor:
    """Piecewise: max_value if x >= max_value (when defined); x if
    threshold <= x; negative_slope*(x - threshold) otherwise. Applied
    verbatim for any threshold sign."""
    if negative_slope < 0:
        raise BadArgument(f"negative_slope must be >= 0, got {negative_slope}")
    if max_value is not None and max_value < threshold:
        raise BadArgument("max_value must be >= threshold")
    v = x.nd
    low = negative_slope * (v - threshold)
    out = np.where(v >= threshold, v, low)
    if max_value is not None:
        out = np.where(v >= max_value, max_value, out)
    return Tensor.from_nd(out)


def eval_activation(x: Tensor, fn: str) -> Tensor:
    if fn not in ACTIVATION_FNS:
        raise BadArgument(f"fn must be one of {'|'.join(ACTIVATION_FNS)}, got {fn!r}")
    v = x.nd
    if fn == "linear":
        return Tensor.from_nd(v.copy())
    if fn == "relu":
        return Tensor.from_nd(np.maximum(v, 0.0))
    if fn == "tanh":
        return Tensor.from_nd(np.tanh(v))
    if fn == "sigmoid":
        with np.errstate(over="ignore"):
            return Tensor.from_nd(1.0 / (1.0 + np.exp(-v)))
    # softmax over the last axis, stabilized by the row max
    if x.shape[-1] == 0:
        raise BadArgument("softmax needs a non-empty last axis")
    m = np.max(v, axis=-1, keepdims=True)
    e = np.exp(v - m)
    return Tensor.from_nd(e / np.sum(e, axis=-1, keepdims=True))


def eval_dropout(x: Tensor, rate: float) -> Tensor:
    """Reference prediction treats dropout as identity."""
    if not 0 <= rate < 1:
        raise BadArgument(f"rate must be in [0, 1), got {rate}")
    return Tensor.from_nd(x.nd.copy())


# --- stochastic check (dropout) ---


@dataclass(frozen=True)
class StochasticCheckConfig:
    accepted_rate_diff: float = 0.15
    scaling_check: bool = True
    scaling_rtol: float = 1e-4

    def __post_init__(self):
        if not self.accepted_rate_diff > 0:
            raise BadArgument("accepted_rate_diff must be > 0")


@dataclass(frozen=True)
class StochasticCheckReport:
    passed: bool
    rate: float
    real_rate: float | None
    diff: float | None
    count: int
    n_zero_orig: int
    n_zero_new: int
    scaling_ok: bool
    note: str = ""

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "rate": self.rate,
            "real_rate": self.real_rate,
            "diff": self.diff,
            "count": self.count,
            "n_zero_orig": self.n_zero_orig,
            "n_zero_new": self.n_zero_new,
            "scaling_ok": self.scaling_ok,
            "note": self.note,
        }


def check_stochastic(
    original: Tensor,
    observed: Tensor,
    rate: float,
    config: StochasticCheckConfig = StochasticCheckConfig(),
) -> StochasticCheckReport:
    """Statistical dropout check.

    The observed zero fraction among the originally non-zero elements
    must sit within accepted_rate_diff of the configured rate. With no
    droppable element the check passes vacuously. The optional scaling
    check verifies surviving elements are original/(1-rate).
    """
    if original.shape != observed.shape:
        raise CountMismatch(
            f"shape mismatch: {original.shape} vs {observed.shape}"
        )
    a = original.nd.reshape(-1)
    b = observed.nd.reshape(-1)
    n = a.size
    n_zero_orig = int(np.count_nonzero(a == 0.0))
    n_zero_new = int(np.count_nonzero(b == 0.0))
    droppable = n - n_zero_orig
    if droppable == 0:
        return StochasticCheckReport(
            True, rate, None, None, n, n_zero_orig, n_zero_new, True,
            note="no droppable elements",
        )
    real_rate = (n_zero_new - n_zero_orig) / droppable
    diff = abs(rate - real_rate)
    rate_ok = diff <= config.accepted_rate_diff

    scaling_ok = True
    if config.scaling_check and rate < 1:
        keep = (a != 0.0) & (b != 0.0)
        if keep.any():
            expect = a[keep] / (1.0 - rate)
            err = np.abs(b[keep] - expect)
            scaling_ok = bool(
                np.all(err <= config.scaling_rtol * np.abs(expect) + 1e-9)
            )
    passed = rate_ok and scaling_ok
    note = "" if passed else ("rate outside tolerance" if not rate_ok else "bad scaling")
    return StochasticCheckReport(
        passed, rate, real_rate, diff, n, n_zero_orig, n_zero_new, scaling_ok, note
    )


# --- whole-model evaluation ---


@dataclass(frozen=True)
class EvalResult:
    output: Tensor
    trace: dict[str, Tensor]


def eval_node(node, input_tensors: Sequence[Tensor]) -> Tensor:
    """Dispatch a single layer node on already-computed input tensors."""
    kind = node.kind
    a = node.args
    w = node.weights
    x = input_tensors[0]
    if kind == LayerKind.DENSE:
        return eval_dense(x, w[0], w[1])
    if kind == LayerKind.CONV1D:
        return eval_conv1d(x, w[0], w[1], a["strides"], a["padding"])
    if kind == LayerKind.CONV2D:
        return eval_conv2d(x, w[0], w[1], a["strides"], a["padding"])
    if kind == LayerKind.MAXPOOL1D:
        return eval_pool1d(x, a["pool_size"], a["strides"], a["padding"], "max")
    if kind == LayerKind.AVGPOOL1D:
        return eval_pool1d(x, a["pool_size"], a["strides"], a["padding"], "avg")
    if kind == LayerKind.MAXPOOL2D:
        return eval_pool2d(x, a["pool_size"], a["strides"], a["padding"], "max")
    if kind == LayerKind.AVGPOOL2D:
        return eval_pool2d(x, a["pool_size"], a["strides"], a["padding"], "avg")
    if kind == LayerKind.GLOBALMAXPOOL1D:
        return eval_global_pool1d(x, "max")
    if kind == LayerKind.GLOBALAVGPOOL1D:
        return eval_global_pool1d(x, "avg")
    if kind == LayerKind.FLATTEN:
        return eval_flatten(x)
    if kind == LayerKind.RESHAPE:
        return eval_reshape(x, a["target"])
    if kind == LayerKind.PERMUTE:
        return eval_permute(x, a["order"])
    if kind == LayerKind.REPEATVECTOR:
        return eval_repeat_vector(x, a["n"])
    if kind == LayerKind.CROPPING1D:
        return eval_cropping1d(x, *a["cropping"])
    if kind == LayerKind.CROPPING2D:
        return eval_cropping2d(x, *a["cropping"])
    if kind == LayerKind.ZEROPADDING1D:
        return eval_zeropadding1d(x, *a["padding"])
    if kind == LayerKind.ZEROPADDING2D:
        return eval_zeropadding2d(x, *a["padding"])
    if kind == LayerKind.UPSAMPLING1D:
        return eval_upsampling1d(x, a["size"])
    if kind == LayerKind.UPSAMPLING2D:
        return eval_upsampling2d(x, *a["size"])
    if kind == LayerKind.CONCATENATE:
        return eval_merge("concatenate", input_tensors, a["axis"])
    if kind in (
        LayerKind.ADD,
        LayerKind.SUBTRACT,
        LayerKind.MULTIPLY,
        LayerKind.AVERAGE,
        LayerKind.MAXIMUM,
        LayerKind.MINIMUM,
    ):
        return eval_merge(kind.value.lower(), input_tensors)
    if kind == LayerKind.RELU:
        return eval_relu(x, a["negative_slope"], a["max_value"], a["threshold"])
    if kind == LayerKind.ACTIVATION:
        return eval_activation(x, a["fn"])
    if kind == LayerKind.BATCHNORM:
        return eval_batchnorm(x, w[0], w[1], w[2], w[3], a["epsilon"])
    if kind == LayerKind.DROPOUT:
        return eval_dropout(x, a["rate"])
    if kind == LayerKind.SIMPLERNN:
        return eval_simple_rnn(x, w[0], w[1], w[2])
    raise BadArgument(f"no evaluation rule for kind {kind}")


def _check_bindings(g: ModelGraph, bindings: Mapping[str, Tensor]):
    """Shape-check bound inputs; returns a violation or None."""
    batch = None
    batch_owner = None
    for spec in g.inputs:
        if spec.id not in bindings:
            raise MalformedDocument(f"missing binding for input {spec.id!r}")
        t = bindings[spec.id]
        if t.rank != len(spec.shape) + 1:
            return PrecondViolation(
                ErrorCode.E_DIM,
                spec.id,
                expected=len(spec.shape) + 1,
                observed=t.rank,
            )
        for want, got in zip(spec.shape, t.shape[1:]):
            if want != got:
                return PrecondViolation(
                    ErrorCode.E_INPUT_SHAPE_INCONSISTENT,
                    spec.id,
                    expected=want,
                    observed=got,
                )
        if batch is None:
            batch, batch_owner = t.shape[0], spec.id
        elif t.shape[0] != batch:
            return PrecondViolation(
                ErrorCode.E_INPUT_SHAPE_INCONSISTENT,
                spec.id,
                expected=batch,
                observed=t.shape[0],
                detail=f"batch differs from {batch_owner}",
            )
    for spec in g.inputs:
        if any(d == 0 for d in spec.shape):
            return PrecondViolation(
                ErrorCode.E_EMPTY_OUTPUT, spec.id, expected=1, observed=0
            )
    return None


def eval_model(
    g: ModelGraph,
    bindings: Mapping[str, Tensor],
    *,
    check: bool = True,
) -> EvalResult:
    """Evaluate the whole graph; trace maps every node id to its tensor.

    Preconditions are re-checked per layer in topological order; the
    first failure raises PrecondViolationError carrying the same
    violation the validator would report.
    """
    violation = _check_bindings(g, bindings)
    if violation is not None:
        raise PrecondViolationError(violation)
    trace: dict[str, Tensor] = {}
    for spec in g.inputs:
        trace[spec.id] = bindings[spec.id]
    nodes = g.node_map()
    for nid in topo_order(g):
        if nid in trace:
            continue
        node = nodes[nid]
        tensors = [trace[ref] for ref in node.inputs]
        if check:
            shapes = [t.shape for t in tensors]
            _, violation = check_layer(
                node.kind, node.args, shapes, node.weights, node.id
            )
            if violation is not None:
                raise PrecondViolationError(violation)
        trace[nid] = eval_node(node, tensors)
    return EvalResult(output=trace[g.output], trace=trace)
