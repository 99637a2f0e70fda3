"""Badness-guided random model generation.

Models are built as random layer trees, then repaired into validity by a
feedback loop: validate, find the first violation, mutate at that
location, and keep the mutation only if the badness score improved (or
the violation moved somewhere else). Weights are not materialized while
the tree is in flux; they are drawn once shapes are final, from RNG
streams derived per node so the result is independent of the repair
path length and of campaign worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyPalette
from .ir import InputSpec, LayerNode, ModelGraph, check_graph
from .kinds import DEFAULT_PALETTE, KIND_TABLE, ABSENT, ArgSpec, LayerKind
from .rng import Rng
from .shapes import check_layer, expected_weight_shapes
from .tensor import Tensor
from .violations import ErrorCode, PrecondViolation

# Derivation keys for split streams (arbitrary fixed constants).
_KEY_MODEL = 1
_KEY_WEIGHTS = 2
_KEY_INPUTS = 3

_ADAPTERS_RANK3 = (
    LayerKind.RESHAPE,
    LayerKind.UPSAMPLING1D,
    LayerKind.CROPPING1D,
    LayerKind.ZEROPADDING1D,
)
_ADAPTERS_RANK4 = (
    LayerKind.RESHAPE,
    LayerKind.UPSAMPLING2D,
    LayerKind.CROPPING2D,
    LayerKind.ZEROPADDING2D,
)


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_level: int = 6
    max_tries: int = 200
    max_fanin: int = 3
    stop_probability: float = 0.5
    dim_range: tuple[int, int] = (1, 4)
    int_range: tuple[int, int] = (0, 10)
    value_range: tuple[float, float] = (-1.0, 1.0)
    palette: tuple[LayerKind, ...] = DEFAULT_PALETTE
    paper_bias: bool = False

    def __post_init__(self):
        if not 0 <= self.stop_probability <= 1:
            raise ValueError("stop_probability must be in [0, 1]")
        for name in ("dim_range", "int_range", "value_range"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name} is empty")
        if self.dim_range[0] < 1:
            raise ValueError("dim_range must start at 1 or above")
        if self.max_level < 1 or self.max_tries < 1 or self.max_fanin < 1:
            raise ValueError("max_level, max_tries, max_fanin must be >= 1")
        if not self.palette:
            raise EmptyPalette("palette must be non-empty")


class BuilderNode:
    """Mutable tree node; uid survives mutation so repair can be tracked."""

    __slots__ = ("uid", "kind", "args", "children", "input_shape")

    def __init__(self, uid, kind, args=None, children=None, input_shape=None):
        self.uid = uid
        self.kind = kind
        self.args = args or {}
        self.children = children or []
        self.input_shape = input_shape

    def clone(self) -> "BuilderNode":
        return BuilderNode(
            self.uid,
            self.kind,
            dict(self.args),
            [c.clone() for c in self.children],
            self.input_shape,
        )

    def walk_postorder(self):
        for child in self.children:
            yield from child.walk_postorder()
        yield self

    def find(self, uid) -> "BuilderNode | None":
        for node in self.walk_postorder():
            if node.uid == uid:
                return node
        return None


@dataclass
class _Ctx:
    """Per-model id allocator; ids are never reused, even across restores."""

    n_inputs: int = 0
    n_layers: int = 0

    def input_id(self) -> str:
        uid = f"in{self.n_inputs}"
        self.n_inputs += 1
        return uid

    def layer_id(self) -> str:
        uid = f"n{self.n_layers}"
        self.n_layers += 1
        return uid


# --- argument drawing ---


def _int_bounds(spec: ArgSpec, cfg: GenConfig) -> tuple[int, int]:
    lo = int(spec.lo) if spec.lo is not None else cfg.int_range[0]
    hi = int(spec.hi) if spec.hi is not None else cfg.int_range[1]
    return lo, max(lo, hi)


def _factorization(n: int, parts: int, rng: Rng) -> tuple[int, ...]:
    """Random dims with the given product; every dim >= 1."""
    dims = []
    remaining = n
    for _ in range(parts - 1):
        divisors = [d for d in range(1, remaining + 1) if remaining % d == 0]
        d = rng.choice(divisors)
        dims.append(d)
        remaining //= d
    dims.append(remaining)
    rng.shuffle(dims)
    return tuple(dims)


def draw_args(
    kind: LayerKind, rng: Rng, cfg: GenConfig, child_shapes=None
) -> dict:
    """Draw a full argument set for the kind.

    With child_shapes given (shapes of the node's already-valid children,
    batch first), draws are clamped to values that can fit those shapes;
    this is the context-aware mode used by repair mutations.
    """
    spec = KIND_TABLE[kind]
    shape = child_shapes[0] if child_shapes else None
    args: dict = {}

    if kind == LayerKind.RESHAPE:
        if shape is not None:
            n = 1
            for d in shape[1:]:
                n *= d
            parts = max(len(shape) - 1, 1)
            args["target"] = _factorization(n, parts, rng)
        else:
            parts = rng.next_int(1, 3)
            args["target"] = tuple(
                rng.next_int(*cfg.dim_range) for _ in range(parts)
            )
        return args

    if kind == LayerKind.PERMUTE:
        rank = len(shape) if shape is not None else rng.next_int(2, 4)
        order = list(range(1, rank))
        rng.shuffle(order)
        args["order"] = tuple(order)
        return args

    for arg in spec.args:
        if arg.type == "choice":
            args[arg.name] = rng.choice(arg.choices)
        elif arg.type == "float":
            if arg.optional and rng.next_bool(0.5):
                args[arg.name] = ABSENT
            else:
                args[arg.name] = rng.uniform(float(arg.lo), float(arg.hi))
        elif arg.type == "int":
            lo, hi = _int_bounds(arg, cfg)
            if shape is not None:
                if (arg.name in ("kernel_size", "pool_size")
                        and len(shape) > 1 and shape[1] >= 1):
                    hi = max(lo, min(hi, shape[1]))
                elif arg.name == "axis" and kind == LayerKind.CONCATENATE:
                    hi = max(lo, min(hi, len(shape) - 1))
            args[arg.name] = rng.next_int(lo, hi)
        elif arg.type == "int_list":
            lo, hi = _int_bounds(arg, cfg)
            length = arg.length or 2
            values = []
            for i in range(length):
                cap = hi
                if shape is not None:
                    if (arg.name in ("kernel_size", "pool_size")
                            and 1 + i < len(shape) and shape[1 + i] >= 1):
                        cap = max(lo, min(hi, shape[1 + i]))
                    elif arg.name == "cropping" and 1 + i // 2 < len(shape):
                        extent = shape[1 + i // 2]
                        cap = max(lo, min(hi, max(0, (extent - 1) // 2)))
                values.append(rng.next_int(lo, cap))
            args[arg.name] = tuple(values)
        else:
            raise AssertionError(f"unknown arg type {arg.type}")

    if kind == LayerKind.RELU and args.get("max_value") is not ABSENT:
        args["threshold"] = min(args["threshold"], args["max_value"])
    return args


def generate_layer(
    rng: Rng,
    cfg: GenConfig,
    ctx: _Ctx,
    options: Sequence[LayerKind] | None = None,
    child_shapes=None,
) -> BuilderNode:
    """A fresh layer node (kind + args, no children yet)."""
    kinds = tuple(options) if options is not None else cfg.palette
    kinds = tuple(k for k in kinds if k != LayerKind.INPUT)
    if not kinds:
        raise EmptyPalette("no kinds to draw from")
    kind = kinds[rng.next_int(0, len(kinds) - 1)]
    args = draw_args(kind, rng, cfg, child_shapes)
    return BuilderNode(ctx.layer_id(), kind, args)


def _new_input(rng: Rng, cfg: GenConfig, ctx: _Ctx) -> BuilderNode:
    rank = rng.next_int(1, 3)  # excludes batch; tensors are rank 2..4
    dims = tuple(rng.next_int(*cfg.dim_range) for _ in range(rank))
    return BuilderNode(ctx.input_id(), LayerKind.INPUT, input_shape=dims)


def recursive_generation(
    level: int, rng: Rng, cfg: GenConfig, ctx: _Ctx | None = None
) -> BuilderNode | None:
    """Random layer tree; None when the stop coin lands or level is 0."""
    if ctx is None:
        ctx = _Ctx()
    if level <= 0 or rng.next_bool(cfg.stop_probability):
        return None
    node = generate_layer(rng, cfg, ctx)
    fanin = 1
    if KIND_TABLE[node.kind].is_merge:
        fanin = rng.next_int(1, cfg.max_fanin)
    for _ in range(fanin):
        child = recursive_generation(level - 1, rng, cfg, ctx)
        if child is None:
            child = _new_input(rng, cfg, ctx)
        node.children.append(child)
    return node


# --- tree validation (structure first, weights deferred) ---


def tree_validate(root: BuilderNode):
    """Returns (violation|None, offending node|None, shapes by uid).

    Walks in depth-first post-order, which is also the order layers are
    frozen in, so "first violation" agrees with validate_model on the
    frozen graph.
    """
    shapes: dict[str, tuple] = {}
    for node in root.walk_postorder():
        if node.uid in shapes:
            continue
        if node.kind == LayerKind.INPUT:
            shapes[node.uid] = (None,) + tuple(node.input_shape)
            continue
        in_shapes = [shapes[c.uid] for c in node.children]
        out_shape, violation = check_layer(
            node.kind,
            node.args,
            in_shapes,
            (),
            node.uid,
            require_weights=False,
        )
        if violation is not None:
            return violation, node, shapes
        shapes[node.uid] = out_shape
    return None, None, shapes


# --- freezing to ModelGraph ---


def _draw_tensor(shape, rng: Rng, cfg: GenConfig, lo=None, hi=None) -> Tensor:
    if lo is None:
        lo, hi = cfg.value_range
    n = 1
    for d in shape:
        n *= d
    values = [rng.uniform(lo, hi) for _ in range(n)]
    return Tensor(shape, np.array(values, dtype=np.float64))


def _weight_ranges(kind: LayerKind, count: int, cfg: GenConfig) -> list[tuple]:
    lo, hi = cfg.value_range
    ranges = [(lo, hi)] * count
    if kind == LayerKind.BATCHNORM and count == 4:
        # moving variance must stay non-negative or sqrt goes NaN
        ranges[3] = (0.0, max(hi, 0.0))
    return ranges


def _uid_key(uid: str) -> int:
    digits = "".join(ch for ch in uid if ch.isdigit())
    base = 1 if uid.startswith("in") else 2
    return base * 1_000_000 + int(digits or 0)


def freeze(root: BuilderNode, cfg: GenConfig, model_rng: Rng) -> ModelGraph:
    """Materialize weights and produce an immutable, checked graph."""
    violation, _, shapes = tree_validate(root)
    if violation is not None:
        raise ValueError(f"cannot freeze invalid tree: {violation.message}")
    inputs: list[InputSpec] = []
    layers: list[LayerNode] = []
    seen: set[str] = set()
    for node in root.walk_postorder():
        if node.uid in seen:
            continue
        seen.add(node.uid)
        if node.kind == LayerKind.INPUT:
            inputs.append(InputSpec(node.uid, tuple(node.input_shape)))
            continue
        w_shapes = expected_weight_shapes(
            node.kind, node.args, [shapes[c.uid] for c in node.children]
        )
        wrng = model_rng.derive(_KEY_WEIGHTS, _uid_key(node.uid))
        ranges = _weight_ranges(node.kind, len(w_shapes), cfg)
        weights = tuple(
            _draw_tensor(s, wrng, cfg, *r) for s, r in zip(w_shapes, ranges)
        )
        layers.append(
            LayerNode(
                node.uid,
                node.kind,
                dict(node.args),
                weights,
                tuple(c.uid for c in node.children),
            )
        )
    g = ModelGraph(tuple(inputs), tuple(layers), root.uid)
    check_graph(g)
    return g


def try_freeze(root: BuilderNode, cfg: GenConfig, model_rng: Rng) -> ModelGraph | None:
    """Freeze an *invalid* tree when it is still structurally sound.

    Weights are materialized only for nodes whose input shapes are known
    (everything before the first violation); later nodes keep empty
    weight lists. Returns None for trees that cannot form a parseable
    graph (e.g. a merge that currently has one child).
    """
    _, _, shapes = tree_validate(root)
    inputs: list[InputSpec] = []
    layers: list[LayerNode] = []
    seen: set[str] = set()
    for node in root.walk_postorder():
        if node.uid in seen:
            continue
        seen.add(node.uid)
        if node.kind == LayerKind.INPUT:
            inputs.append(InputSpec(node.uid, tuple(node.input_shape)))
            continue
        weights = ()
        if all(c.uid in shapes for c in node.children):
            in_shapes = [shapes[c.uid] for c in node.children]
            try:
                w_shapes = expected_weight_shapes(node.kind, node.args, in_shapes)
            except Exception:
                w_shapes = []
            if w_shapes:
                wrng = model_rng.derive(_KEY_WEIGHTS, _uid_key(node.uid))
                ranges = _weight_ranges(node.kind, len(w_shapes), cfg)
                try:
                    weights = tuple(
                        _draw_tensor(s, wrng, cfg, *r)
                        for s, r in zip(w_shapes, ranges)
                    )
                except Exception:
                    weights = ()
        layers.append(
            LayerNode(
                node.uid,
                node.kind,
                dict(node.args),
                weights,
                tuple(c.uid for c in node.children),
            )
        )
    g = ModelGraph(tuple(inputs), tuple(layers), root.uid)
    try:
        check_graph(g)
    except Exception:
        return None
    return g


def generate_inputs(
    g: ModelGraph, rng: Rng, cfg: GenConfig = GenConfig()
) -> dict[str, Tensor]:
    """Batch-1 random tensors for every declared input, from split streams."""
    bindings = {}
    for j, spec in enumerate(g.inputs):
        stream = rng.derive(_KEY_INPUTS, j)
        bindings[spec.id] = _draw_tensor((1,) + spec.shape, stream, cfg)
    return bindings


# --- the repair loop (Algorithm of the badness feedback) ---


@dataclass
class RepairOutcome:
    graph: ModelGraph | None
    bindings: dict[str, Tensor] | None
    tries: int
    history: list[tuple[str, int]] = field(default_factory=list)
    last_invalid: ModelGraph | None = None
    last_violation: PrecondViolation | None = None

    @property
    def valid(self) -> bool:
        return self.graph is not None


def _mutation_weights(cfg: GenConfig) -> list[float]:
    if cfg.paper_bias:
        # Chained coin-flip bias: earlier options are likelier.
        return [8.0, 4.0, 2.0, 2.0]
    return [1.0, 1.0, 1.0, 1.0]


def _rank_compatible(cfg: GenConfig, rank: int, merges: bool) -> tuple:
    kinds = []
    for kind in cfg.palette:
        if kind == LayerKind.INPUT:
            continue
        spec = KIND_TABLE[kind]
        if spec.is_merge and not merges:
            continue
        if spec.exact_rank is None or spec.exact_rank == rank:
            kinds.append(kind)
    return tuple(kinds)


def _leaf_for_kind(kind: LayerKind, rng: Rng, cfg: GenConfig, ctx: _Ctx,
                   shape=None) -> BuilderNode:
    """Input leaf shaped for the kind; a given shape wins outright."""
    if shape is not None:
        return BuilderNode(ctx.input_id(), LayerKind.INPUT,
                           input_shape=tuple(shape))
    exact = KIND_TABLE[kind].exact_rank
    rank = (exact - 1) if exact else rng.next_int(1, 3)
    dims = tuple(rng.next_int(*cfg.dim_range) for _ in range(rank))
    return BuilderNode(ctx.input_id(), LayerKind.INPUT, input_shape=dims)


def _mutate(
    node: BuilderNode,
    violation: PrecondViolation,
    shapes: Mapping[str, tuple],
    rng: Rng,
    cfg: GenConfig,
    ctx: _Ctx,
) -> None:
    """Apply one randomly chosen mutation at the failing node, in place."""
    child_idx = violation.input_index or 0
    child_idx = min(child_idx, len(node.children) - 1)
    child = node.children[child_idx]
    child_shape = shapes.get(child.uid)
    child_shapes = [shapes.get(c.uid) for c in node.children]
    known = [s for s in child_shapes if s is not None]

    family = rng.weighted_choice(("args", "adapter", "replace", "child"),
                                 _mutation_weights(cfg))

    if family == "args" and KIND_TABLE[node.kind].args:
        node.args = draw_args(node.kind, rng, cfg, known or None)
        return

    if family == "adapter" and child_shape is not None:
        want = None
        if (violation.code == ErrorCode.E_DIM
                and isinstance(violation.expected, int)
                and violation.expected >= 2):
            want = violation.expected
        if want is not None and want != len(child_shape):
            n = 1
            for d in child_shape[1:]:
                n *= d
            adapter = BuilderNode(
                ctx.layer_id(),
                LayerKind.RESHAPE,
                {"target": _factorization(n, want - 1, rng)},
            )
        else:
            rank = len(child_shape)
            if rank == 3:
                options = _ADAPTERS_RANK3
            elif rank == 4:
                options = _ADAPTERS_RANK4
            else:
                options = (LayerKind.RESHAPE,)
            adapter = generate_layer(rng, cfg, ctx, options, [child_shape])
        adapter.children = [child]
        node.children[child_idx] = adapter
        return

    if family == "child":
        fresh = generate_layer(rng, cfg, ctx)
        spec = KIND_TABLE[fresh.kind]
        fanin = rng.next_int(2, cfg.max_fanin) if spec.is_merge else 1
        first = _leaf_for_kind(fresh.kind, rng, cfg, ctx)
        leaves = [first]
        # merge siblings share a shape, so elementwise kinds line up
        for _ in range(fanin - 1):
            leaves.append(
                _leaf_for_kind(fresh.kind, rng, cfg, ctx, first.input_shape)
            )
        fresh.children = leaves
        node.children[child_idx] = fresh
        return

    # replace the layer itself, keeping its uid and adopting children
    merges_ok = (
        len(known) == len(node.children)
        and len(known) >= 2
        and all(s == known[0] for s in known)
    )
    options = None
    if known:
        options = _rank_compatible(cfg, len(known[0]), merges_ok) or None
    replacement = generate_layer(rng, cfg, ctx, options, known or None)
    spec = KIND_TABLE[replacement.kind]
    children = list(node.children)
    if spec.is_merge:
        keep = children[: cfg.max_fanin]
        while len(keep) < 2:
            keep.append(_new_input(rng, cfg, ctx))
    else:
        keep = children[:1]
    node.kind = replacement.kind
    node.args = replacement.args
    node.children = keep


def find_valid_model(
    root: BuilderNode,
    cfg: GenConfig,
    rng: Rng,
    ctx: _Ctx | None = None,
) -> RepairOutcome:
    """Repair loop: validate, mutate at the first violation, keep
    improvements, restore otherwise; at most max_tries validations."""
    if ctx is None:
        counters = _count_ids(root)
        ctx = _Ctx(counters[0], counters[1])
    current = root
    accepted: BuilderNode | None = None
    accepted_v: PrecondViolation | None = None
    history: list[tuple[str, int]] = []
    before_last_mutation: BuilderNode | None = None
    before_last_v: PrecondViolation | None = None

    for attempt in range(1, cfg.max_tries + 1):
        violation, node, shapes = tree_validate(current)
        if violation is None:
            graph = freeze(current, cfg, rng)
            bindings = generate_inputs(graph, rng, cfg)
            last_invalid = None
            if before_last_mutation is not None:
                last_invalid = try_freeze(before_last_mutation, cfg, rng)
            return RepairOutcome(
                graph,
                bindings,
                attempt,
                history,
                last_invalid,
                before_last_v if last_invalid is not None else None,
            )
        restored = (
            accepted is not None
            and accepted_v is not None
            and violation.layer_id == accepted_v.layer_id
            and violation.badness >= accepted_v.badness
        )
        if restored:
            current = accepted.clone()
            violation = accepted_v
            node = current.find(violation.layer_id)
            _, _, shapes = tree_validate(current)
        else:
            accepted = current.clone()
            accepted_v = violation
            history.append((violation.layer_id, violation.badness))
        before_last_mutation = current.clone()
        before_last_v = violation
        _mutate(node, violation, shapes, rng, cfg, ctx)

    return RepairOutcome(None, None, cfg.max_tries, history)


def _count_ids(root: BuilderNode) -> tuple[int, int]:
    n_in = n_layer = 0
    for node in root.walk_postorder():
        if node.kind == LayerKind.INPUT:
            n_in = max(n_in, int(node.uid[2:] or 0) + 1)
        else:
            n_layer = max(n_layer, int(node.uid[1:] or 0) + 1)
    return n_in, n_layer


@dataclass
class ModelRecord:
    index: int
    outcome: RepairOutcome


def generate_model(cfg: GenConfig, index: int) -> ModelRecord:
    """One campaign slot: its own derived stream, so order never matters."""
    rng = Rng(cfg.seed).derive(_KEY_MODEL, index)
    ctx = _Ctx()
    tree = None
    while tree is None:
        tree = recursive_generation(cfg.max_level, rng, cfg, ctx)
    outcome = find_valid_model(tree, cfg, rng, ctx)
    return ModelRecord(index, outcome)


def run_generation_campaign(
    cfg: GenConfig, count: int, out_dir, jobs: int = 1
) -> dict:
    """Generate `count` models and write the campaign directory.

    Valid slots get model_<i>.json, inputs_<i>.json and expected_<i>.json
    (reference output plus full trace); invalid slots get nothing. The
    summary lands in campaign.json. Results depend only on (seed, index),
    so any jobs count writes byte-identical files.
    """
    import concurrent.futures
    import os

    from .ir import _emit_json, save_model, serialize_bindings
    from .semantics import eval_model

    os.makedirs(out_dir, exist_ok=True)
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda i: generate_model(cfg, i), range(count)))
    else:
        records = [generate_model(cfg, i) for i in range(count)]

    valid = 0
    tries = []
    for rec in records:
        out = rec.outcome
        tries.append(out.tries)
        if not out.valid:
            continue
        valid += 1
        save_model(out.graph, os.path.join(out_dir, f"model_{rec.index}.json"))
        with open(os.path.join(out_dir, f"inputs_{rec.index}.json"), "w",
                  encoding="utf-8") as fh:
            fh.write(serialize_bindings(out.bindings))
            fh.write("\n")
        result = eval_model(out.graph, out.bindings)
        expected = {
            "output": result.output.to_nested(),
            "trace": {k: v.to_nested() for k, v in result.trace.items()},
        }
        with open(os.path.join(out_dir, f"expected_{rec.index}.json"), "w",
                  encoding="utf-8") as fh:
            fh.write(_emit_json(expected))
            fh.write("\n")

    summary = {
        "valid_count": valid,
        "invalid_count": count - valid,
        "mean_tries": (sum(tries) / len(tries)) if tries else 0.0,
        "seed": cfg.seed,
    }
    with open(os.path.join(out_dir, "campaign.json"), "w", encoding="utf-8") as fh:
        fh.write(_emit_json(summary))
        fh.write("\n")
    return summary
