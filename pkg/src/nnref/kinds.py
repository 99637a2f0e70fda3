"""Layer kind registry: names, arities, argument schemas, weight counts.

This is the single table the parser, validator, generator and emitters
share. Argument schemas describe interchange types and static bounds;
generation ranges that depend on configuration (units, filters) are
marked with `config_range` and resolved by the generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class LayerKind(str, Enum):
    INPUT = "Input"
    DENSE = "Dense"
    CONV1D = "Conv1D"
    CONV2D = "Conv2D"
    MAXPOOL1D = "MaxPool1D"
    MAXPOOL2D = "MaxPool2D"
    AVGPOOL1D = "AvgPool1D"
    AVGPOOL2D = "AvgPool2D"
    GLOBALMAXPOOL1D = "GlobalMaxPool1D"
    GLOBALAVGPOOL1D = "GlobalAvgPool1D"
    FLATTEN = "Flatten"
    RESHAPE = "Reshape"
    PERMUTE = "Permute"
    REPEATVECTOR = "RepeatVector"
    CROPPING1D = "Cropping1D"
    CROPPING2D = "Cropping2D"
    ZEROPADDING1D = "ZeroPadding1D"
    ZEROPADDING2D = "ZeroPadding2D"
    UPSAMPLING1D = "UpSampling1D"
    UPSAMPLING2D = "UpSampling2D"
    CONCATENATE = "Concatenate"
    ADD = "Add"
    SUBTRACT = "Subtract"
    MULTIPLY = "Multiply"
    AVERAGE = "Average"
    MAXIMUM = "Maximum"
    MINIMUM = "Minimum"
    RELU = "ReLU"
    ACTIVATION = "Activation"
    BATCHNORM = "BatchNorm"
    DROPOUT = "Dropout"
    SIMPLERNN = "SimpleRNN"


KIND_BY_NAME = {k.value: k for k in LayerKind}

ACTIVATION_FNS = ("relu", "sigmoid", "tanh", "softmax", "linear")

# Sentinel for "argument may be absent"; serialized by omission.
ABSENT = None


@dataclass(frozen=True)
class ArgSpec:
    name: str
    type: str  # "int" | "float" | "choice" | "int_list"
    lo: float | None = None
    hi: float | None = None
    length: int | None = None  # for int_list with fixed length
    choices: tuple[str, ...] = ()
    default: object = "__required__"
    optional: bool = False  # value may be ABSENT even after defaulting
    config_range: str | None = None  # GenConfig attribute naming the draw range

    @property
    def required(self) -> bool:
        return self.default == "__required__"


@dataclass(frozen=True)
class KindSpec:
    kind: LayerKind
    arity_lo: int
    arity_hi: int
    n_weights: int = 0
    args: tuple[ArgSpec, ...] = ()
    exact_rank: int | None = None  # required input rank including batch
    is_merge: bool = False
    semantic_arity: int | None = None  # stricter arity checked by the validator

    def arg(self, name: str) -> ArgSpec:
        for a in self.args:
            if a.name == name:
                return a
        raise KeyError(name)


def _unary(kind, n_weights=0, args=(), exact_rank=None):
    return KindSpec(kind, 1, 1, n_weights, tuple(args), exact_rank)


def _merge(kind, semantic_arity=None):
    return KindSpec(
        kind, 2, 3, 0, (), None, is_merge=True, semantic_arity=semantic_arity
    )


_PADDING = ArgSpec("padding", "choice", choices=("valid", "same"), default="valid")


KIND_TABLE: dict[LayerKind, KindSpec] = {
    LayerKind.DENSE: _unary(
        LayerKind.DENSE,
        n_weights=2,
        args=(ArgSpec("units", "int", lo=1, config_range="units_range"),),
    ),
    LayerKind.CONV1D: _unary(
        LayerKind.CONV1D,
        n_weights=2,
        args=(
            ArgSpec("filters", "int", lo=1, config_range="units_range"),
            ArgSpec("kernel_size", "int", lo=1, hi=3),
            ArgSpec("strides", "int", lo=1, hi=3, default=1),
            _PADDING,
        ),
        exact_rank=3,
    ),
    LayerKind.CONV2D: _unary(
        LayerKind.CONV2D,
        n_weights=2,
        args=(
            ArgSpec("filters", "int", lo=1, config_range="units_range"),
            ArgSpec("kernel_size", "int_list", lo=1, hi=3, length=2),
            ArgSpec("strides", "int_list", lo=1, hi=3, length=2, default=(1, 1)),
            _PADDING,
        ),
        exact_rank=4,
    ),
    LayerKind.MAXPOOL1D: _unary(
        LayerKind.MAXPOOL1D,
        args=(
            ArgSpec("pool_size", "int", lo=1, hi=3),
            ArgSpec("strides", "int", lo=1, hi=3, default=1),
            _PADDING,
        ),
        exact_rank=3,
    ),
    LayerKind.MAXPOOL2D: _unary(
        LayerKind.MAXPOOL2D,
        args=(
            ArgSpec("pool_size", "int_list", lo=1, hi=3, length=2),
            ArgSpec("strides", "int_list", lo=1, hi=3, length=2, default=(1, 1)),
            _PADDING,
        ),
        exact_rank=4,
    ),
    LayerKind.AVGPOOL1D: _unary(
        LayerKind.AVGPOOL1D,
        args=(
            ArgSpec("pool_size", "int", lo=1, hi=3),
            ArgSpec("strides", "int", lo=1, hi=3, default=1),
            _PADDING,
        ),
        exact_rank=3,
    ),
    LayerKind.AVGPOOL2D: _unary(
        LayerKind.AVGPOOL2D,
        args=(
            ArgSpec("pool_size", "int_list", lo=1, hi=3, length=2),
            ArgSpec("strides", "int_list", lo=1, hi=3, length=2, default=(1, 1)),
            _PADDING,
        ),
        exact_rank=4,
    ),
    LayerKind.GLOBALMAXPOOL1D: _unary(LayerKind.GLOBALMAXPOOL1D, exact_rank=3),
    LayerKind.GLOBALAVGPOOL1D: _unary(LayerKind.GLOBALAVGPOOL1D, exact_rank=3),
    LayerKind.FLATTEN: _unary(LayerKind.FLATTEN),
    LayerKind.RESHAPE: _unary(
        LayerKind.RESHAPE,
        args=(ArgSpec("target", "int_list", lo=1),),
    ),
    LayerKind.PERMUTE: _unary(
        LayerKind.PERMUTE,
        args=(ArgSpec("order", "int_list", lo=1),),
    ),
    LayerKind.REPEATVECTOR: _unary(
        LayerKind.REPEATVECTOR,
        args=(ArgSpec("n", "int", lo=1, hi=3),),
        exact_rank=2,
    ),
    LayerKind.CROPPING1D: _unary(
        LayerKind.CROPPING1D,
        args=(ArgSpec("cropping", "int_list", lo=0, hi=2, length=2),),
        exact_rank=3,
    ),
    LayerKind.CROPPING2D: _unary(
        LayerKind.CROPPING2D,
        args=(ArgSpec("cropping", "int_list", lo=0, hi=2, length=4),),
        exact_rank=4,
    ),
    LayerKind.ZEROPADDING1D: _unary(
        LayerKind.ZEROPADDING1D,
        args=(ArgSpec("padding", "int_list", lo=0, hi=2, length=2),),
        exact_rank=3,
    ),
    LayerKind.ZEROPADDING2D: _unary(
        LayerKind.ZEROPADDING2D,
        args=(ArgSpec("padding", "int_list", lo=0, hi=2, length=4),),
        exact_rank=4,
    ),
    LayerKind.UPSAMPLING1D: _unary(
        LayerKind.UPSAMPLING1D,
        args=(ArgSpec("size", "int", lo=1, hi=3),),
        exact_rank=3,
    ),
    LayerKind.UPSAMPLING2D: _unary(
        LayerKind.UPSAMPLING2D,
        args=(ArgSpec("size", "int_list", lo=1, hi=3, length=2),),
        exact_rank=4,
    ),
    LayerKind.CONCATENATE: KindSpec(
        LayerKind.CONCATENATE,
        2,
        3,
        args=(ArgSpec("axis", "int", lo=1, hi=3),),
        is_merge=True,
    ),
    LayerKind.ADD: _merge(LayerKind.ADD),
    LayerKind.SUBTRACT: _merge(LayerKind.SUBTRACT, semantic_arity=2),
    LayerKind.MULTIPLY: _merge(LayerKind.MULTIPLY),
    LayerKind.AVERAGE: _merge(LayerKind.AVERAGE),
    LayerKind.MAXIMUM: _merge(LayerKind.MAXIMUM),
    LayerKind.MINIMUM: _merge(LayerKind.MINIMUM),
    LayerKind.RELU: _unary(
        LayerKind.RELU,
        args=(
            ArgSpec("negative_slope", "float", lo=0.0, hi=1.0, default=0.0),
            ArgSpec("max_value", "float", lo=0.0, hi=2.0, default=ABSENT, optional=True),
            # Draw from the non-negative range: the evaluator handles any
            # threshold sign, but current frameworks reject negative ones
            # at construction, which would starve random campaigns.
            ArgSpec("threshold", "float", lo=0.0, hi=1.0, default=0.0),
        ),
    ),
    LayerKind.ACTIVATION: _unary(
        LayerKind.ACTIVATION,
        args=(ArgSpec("fn", "choice", choices=ACTIVATION_FNS),),
    ),
    LayerKind.BATCHNORM: _unary(
        LayerKind.BATCHNORM,
        n_weights=4,
        args=(ArgSpec("epsilon", "float", lo=1e-5, hi=1e-2, default=1e-3),),
    ),
    LayerKind.DROPOUT: _unary(
        LayerKind.DROPOUT,
        args=(ArgSpec("rate", "float", lo=0.0, hi=0.9),),
    ),
    LayerKind.SIMPLERNN: _unary(
        LayerKind.SIMPLERNN,
        n_weights=3,
        args=(ArgSpec("units", "int", lo=1, config_range="units_range"),),
        exact_rank=3,
    ),
}


MERGE_KINDS = tuple(k for k, s in KIND_TABLE.items() if s.is_merge)

# Kinds eligible as fuzzer palette entries; SimpleRNN is opt-in.
DEFAULT_PALETTE = tuple(k for k in KIND_TABLE if k != LayerKind.SIMPLERNN)

WEIGHTED_KINDS = tuple(k for k, s in KIND_TABLE.items() if s.n_weights > 0)
