"""Model intermediate representation: graphs, parsing, canonical text.

A model is a DAG of layer nodes over named inputs, with one designated
output node. Input specs carry shapes without the batch dimension; the
batch is fixed later by the bound input tensors. Weights live inside
layer nodes so a model document is fully self-contained.

Two orderings exist on purpose:

* topo_order(g) is declaration-stable: inputs first in declared order,
  then layers, each emitted at the earliest point its dependencies allow,
  preferring earlier-declared nodes. Evaluation, validation and
  localization all use it, so "first failing layer" is reproducible.
* canonical serialization orders layers with an id-sorted variant of the
  same algorithm, so any permutation of the node list serializes to the
  identical text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import (
    BadArity,
    CycleDetected,
    DanglingEdge,
    MalformedDocument,
    UnknownKind,
)
from .kinds import ABSENT, KIND_BY_NAME, KIND_TABLE, ArgSpec, KindSpec, LayerKind
from .tensor import Tensor, fmt_float


@dataclass(frozen=True)
class InputSpec:
    id: str
    shape: tuple[int, ...]  # excludes batch


@dataclass(frozen=True)
class LayerNode:
    id: str
    kind: LayerKind
    args: dict = field(default_factory=dict)
    weights: tuple[Tensor, ...] = ()
    inputs: tuple[str, ...] = ()

    def __post_init__(self):
        # Normalize: fill defaulted args, freeze list-valued args to tuples.
        spec = KIND_TABLE[self.kind]
        args = dict(self.args)
        for a in spec.args:
            if a.name in args:
                if isinstance(args[a.name], list):
                    args[a.name] = tuple(args[a.name])
            elif not a.required:
                args[a.name] = a.default
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(self, "inputs", tuple(self.inputs))

    def __eq__(self, other):
        if not isinstance(other, LayerNode):
            return NotImplemented
        return (
            self.id == other.id
            and self.kind == other.kind
            and self.args == other.args
            and len(self.weights) == len(other.weights)
            and all(a == b for a, b in zip(self.weights, other.weights))
            and self.inputs == other.inputs
        )


@dataclass(frozen=True)
class ModelGraph:
    inputs: tuple[InputSpec, ...]
    layers: tuple[LayerNode, ...]
    output: str

    def input_map(self) -> dict[str, InputSpec]:
        return {s.id: s for s in self.inputs}

    def node_map(self) -> dict[str, LayerNode]:
        return {n.id: n for n in self.layers}

    def __eq__(self, other):
        # layer declaration order is presentation, not meaning
        if not isinstance(other, ModelGraph):
            return NotImplemented
        return (
            self.inputs == other.inputs
            and self.output == other.output
            and self.node_map() == other.node_map()
        )


def check_graph(g: ModelGraph) -> None:
    """Structural validity: unique ids, resolvable edges, acyclic, reachable."""
    ids: set[str] = set()
    for spec in g.inputs:
        if spec.id in ids:
            raise MalformedDocument(f"duplicate id {spec.id!r}")
        ids.add(spec.id)
        if len(spec.shape) < 1:
            raise MalformedDocument(f"input {spec.id!r} has rank-0 shape")
        for d in spec.shape:
            if d < 0:
                raise MalformedDocument(f"input {spec.id!r} has negative dim")
    for node in g.layers:
        if node.id in ids:
            raise MalformedDocument(f"duplicate id {node.id!r}")
        ids.add(node.id)
    for node in g.layers:
        spec = KIND_TABLE[node.kind]
        if not spec.arity_lo <= len(node.inputs) <= spec.arity_hi:
            raise BadArity(
                f"{node.id}: {node.kind.value} takes {spec.arity_lo}..{spec.arity_hi} "
                f"inputs, got {len(node.inputs)}"
            )
        for ref in node.inputs:
            if ref not in ids:
                raise DanglingEdge(f"{node.id}: unknown input {ref!r}")
    if g.output not in ids:
        raise DanglingEdge(f"output references unknown node {g.output!r}")
    topo_order(g)  # raises CycleDetected on cycles
    reachable = reachable_ids(g)
    for node in g.layers:
        if node.id not in reachable:
            raise MalformedDocument(f"node {node.id!r} is unreachable from the output")
    for spec in g.inputs:
        if spec.id not in reachable:
            raise MalformedDocument(f"input {spec.id!r} is unreachable from the output")


def reachable_ids(g: ModelGraph) -> set[str]:
    nodes = g.node_map()
    seen: set[str] = set()
    stack = [g.output]
    while stack:
        nid = stack.pop()
        if nid in seen:
            continue
        seen.add(nid)
        node = nodes.get(nid)
        if node is not None:
            stack.extend(node.inputs)
    return seen


def _stable_topo(g: ModelGraph, layer_positions: Mapping[str, int]) -> list[str]:
    """Kahn's algorithm preferring lower position among ready layer nodes."""
    order = [s.id for s in g.inputs]
    done = set(order)
    pending = {n.id: n for n in g.layers}
    result = list(order)
    while pending:
        ready = [
            nid
            for nid, node in pending.items()
            if all(ref in done for ref in node.inputs)
        ]
        if not ready:
            raise CycleDetected(
                "cycle through: " + ", ".join(sorted(pending)[:5])
            )
        nid = min(ready, key=lambda i: layer_positions[i])
        result.append(nid)
        done.add(nid)
        del pending[nid]
    return result


def topo_order(g: ModelGraph) -> list[str]:
    positions = {n.id: i for i, n in enumerate(g.layers)}
    return _stable_topo(g, positions)


def canonical_layer_order(g: ModelGraph) -> list[str]:
    positions = {nid: i for i, nid in enumerate(sorted(n.id for n in g.layers))}
    return [nid for nid in _stable_topo(g, positions) if nid in positions]


def subgraph(g: ModelGraph, output_id: str) -> ModelGraph:
    """The sub-model computing `output_id`: reachable nodes and inputs only."""
    pruned = ModelGraph(g.inputs, g.layers, output_id)
    keep = reachable_ids(pruned)
    return ModelGraph(
        inputs=tuple(s for s in g.inputs if s.id in keep),
        layers=tuple(n for n in g.layers if n.id in keep),
        output=output_id,
    )


# --- canonical JSON text ---


def _emit_json(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_emit_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        parts = []
        for key in sorted(obj):
            parts.append(json.dumps(key) + ":" + _emit_json(obj[key]))
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _args_doc(node: LayerNode) -> dict:
    doc = {}
    for spec in KIND_TABLE[node.kind].args:
        value = node.args.get(spec.name, spec.default)
        if value is ABSENT and spec.optional:
            continue
        if isinstance(value, tuple):
            value = list(value)
        doc[spec.name] = value
    return doc


def serialize_model(g: ModelGraph) -> str:
    nodes = g.node_map()
    layers_doc = []
    for nid in canonical_layer_order(g):
        node = nodes[nid]
        doc = {
            "id": node.id,
            "kind": node.kind.value,
            "args": _args_doc(node),
            "inputs": list(node.inputs),
        }
        if node.weights:
            doc["weights"] = [w.to_nested() for w in node.weights]
        layers_doc.append(doc)
    doc = {
        "version": 1,
        "inputs": [{"id": s.id, "shape": list(s.shape)} for s in g.inputs],
        "layers": layers_doc,
        "output": g.output,
    }
    return _emit_json(doc)


# --- parsing ---


def _require_keys(obj: dict, required: Sequence[str], optional: Sequence[str], what: str):
    for key in required:
        if key not in obj:
            raise MalformedDocument(f"{what}: missing key {key!r}")
    allowed = set(required) | set(optional)
    for key in obj:
        if key not in allowed:
            raise MalformedDocument(f"{what}: unexpected key {key!r}")


def _parse_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedDocument(f"{what}: expected integer, got {value!r}")
    return value


def _parse_arg(spec: ArgSpec, value, what: str):
    if value is None:
        if spec.optional:
            return ABSENT
        raise MalformedDocument(f"{what}: argument {spec.name!r} may not be null")
    if spec.type == "int":
        return _parse_int(value, what)
    if spec.type == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MalformedDocument(f"{what}: expected number, got {value!r}")
        return float(value)
    if spec.type == "choice":
        if not isinstance(value, str):
            raise MalformedDocument(f"{what}: expected string, got {value!r}")
        return value
    if spec.type == "int_list":
        if not isinstance(value, (list, tuple)):
            raise MalformedDocument(f"{what}: expected list, got {value!r}")
        items = tuple(_parse_int(v, what) for v in value)
        if spec.length is not None and len(items) != spec.length:
            raise MalformedDocument(
                f"{what}: expected {spec.length} entries, got {len(items)}"
            )
        return items
    raise AssertionError(f"unknown arg type {spec.type}")


def _parse_layer(obj, index: int) -> LayerNode:
    what = f"layers[{index}]"
    if not isinstance(obj, dict):
        raise MalformedDocument(f"{what}: expected object")
    _require_keys(obj, ("id", "kind", "inputs"), ("args", "weights"), what)
    layer_id = obj["id"]
    if not isinstance(layer_id, str) or not layer_id:
        raise MalformedDocument(f"{what}: id must be a non-empty string")
    kind_name = obj["kind"]
    if not isinstance(kind_name, str):
        raise MalformedDocument(f"{what}: kind must be a string")
    kind = KIND_BY_NAME.get(kind_name)
    if kind is None:
        raise UnknownKind(f"{what}: unknown kind {kind_name!r}")
    if kind == LayerKind.INPUT:
        raise MalformedDocument(f"{what}: Input nodes belong in the inputs section")
    spec: KindSpec = KIND_TABLE[kind]

    raw_args = obj.get("args", {})
    if not isinstance(raw_args, dict):
        raise MalformedDocument(f"{what}: args must be an object")
    known = {a.name for a in spec.args}
    for name in raw_args:
        if name not in known:
            raise MalformedDocument(f"{what}: unknown argument {name!r}")
    args = {}
    for arg_spec in spec.args:
        if arg_spec.name in raw_args:
            args[arg_spec.name] = _parse_arg(arg_spec, raw_args[arg_spec.name], what)
        elif arg_spec.required:
            raise MalformedDocument(f"{what}: missing argument {arg_spec.name!r}")
        else:
            args[arg_spec.name] = arg_spec.default

    raw_inputs = obj["inputs"]
    if not isinstance(raw_inputs, list) or not all(
        isinstance(r, str) for r in raw_inputs
    ):
        raise MalformedDocument(f"{what}: inputs must be a list of ids")
    if not spec.arity_lo <= len(raw_inputs) <= spec.arity_hi:
        raise BadArity(
            f"{what}: {kind.value} takes {spec.arity_lo}..{spec.arity_hi} inputs, "
            f"got {len(raw_inputs)}"
        )

    raw_weights = obj.get("weights", [])
    if not isinstance(raw_weights, list):
        raise MalformedDocument(f"{what}: weights must be a list")
    if len(raw_weights) not in (0, spec.n_weights):
        raise MalformedDocument(
            f"{what}: {kind.value} carries {spec.n_weights} weight arrays or none, "
            f"got {len(raw_weights)}"
        )
    try:
        weights = tuple(Tensor.from_nested(w) for w in raw_weights)
    except Exception as exc:
        raise MalformedDocument(f"{what}: bad weight array: {exc}") from None

    return LayerNode(layer_id, kind, args, weights, tuple(raw_inputs))


def parse_document(doc) -> ModelGraph:
    if not isinstance(doc, dict):
        raise MalformedDocument("top level must be an object")
    _require_keys(doc, ("version", "inputs", "layers", "output"), (), "document")
    if doc["version"] != 1:
        raise MalformedDocument(f"unsupported version {doc['version']!r}")
    raw_inputs = doc["inputs"]
    if not isinstance(raw_inputs, list) or not raw_inputs:
        raise MalformedDocument("inputs must be a non-empty list")
    inputs = []
    for i, obj in enumerate(raw_inputs):
        what = f"inputs[{i}]"
        if not isinstance(obj, dict):
            raise MalformedDocument(f"{what}: expected object")
        _require_keys(obj, ("id", "shape"), (), what)
        iid = obj["id"]
        if not isinstance(iid, str) or not iid:
            raise MalformedDocument(f"{what}: id must be a non-empty string")
        shape = obj["shape"]
        if not isinstance(shape, list) or not shape:
            raise MalformedDocument(f"{what}: shape must be a non-empty list")
        dims = tuple(_parse_int(d, what) for d in shape)
        for d in dims:
            if d < 0:
                raise MalformedDocument(f"{what}: negative dim {d}")
        inputs.append(InputSpec(iid, dims))
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list):
        raise MalformedDocument("layers must be a list")
    layers = tuple(_parse_layer(obj, i) for i, obj in enumerate(raw_layers))
    output = doc["output"]
    if not isinstance(output, str):
        raise MalformedDocument("output must be a node id")
    g = ModelGraph(tuple(inputs), layers, output)
    check_graph(g)
    return g


def parse_model(text: str) -> ModelGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from None
    return parse_document(doc)


def load_model(path) -> ModelGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())


def save_model(g: ModelGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_model(g))
        fh.write("\n")


# --- input bindings ---


def parse_bindings(text: str, g: ModelGraph) -> dict[str, Tensor]:
    """Bindings file: {"<input-id>": nested-array}; batch dim included."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedDocument("bindings must be an object")
    declared = g.input_map()
    for key in doc:
        if key not in declared:
            raise MalformedDocument(f"binding for unknown input {key!r}")
    bindings = {}
    for spec in g.inputs:
        if spec.id not in doc:
            raise MalformedDocument(f"missing binding for input {spec.id!r}")
        try:
            bindings[spec.id] = Tensor.from_nested(doc[spec.id])
        except Exception as exc:
            raise MalformedDocument(f"binding {spec.id!r}: {exc}") from None
    return bindings


def serialize_bindings(bindings: Mapping[str, Tensor]) -> str:
    return _emit_json({k: v.to_nested() for k, v in bindings.items()})
