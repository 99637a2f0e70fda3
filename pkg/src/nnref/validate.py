"""Whole-model validation by symbolic shape propagation.

Validation walks the graph in topological order, propagating shapes
(batch stays symbolic unless bindings pin it) and checking each layer's
preconditions with the same rule table the evaluator uses. By default
only the first violation is returned, because the fuzzer repairs one
location per iteration; --all mode collects every independent violation
(nodes downstream of a failure are skipped, since their input shapes are
unknown).
"""

from __future__ import annotations

from typing import Mapping

from .ir import ModelGraph, topo_order
from .semantics import _check_bindings
from .shapes import check_layer
from .tensor import Tensor
from .violations import ErrorCode, PrecondViolation

_UNKNOWN = object()


def validate_model(
    g: ModelGraph,
    bindings: Mapping[str, Tensor] | None = None,
    *,
    all_violations: bool = False,
    require_weights: bool = True,
) -> list[PrecondViolation]:
    """Empty list iff eval_model would succeed on shape-compatible inputs."""
    found: list[PrecondViolation] = []

    def record(v: PrecondViolation) -> bool:
        # Returns True when validation should stop (first-violation mode).
        found.append(v)
        return not all_violations

    shapes: dict[str, object] = {}
    if bindings is not None:
        v = _check_bindings(g, bindings)
        if v is not None and record(v):
            return found
        for spec in g.inputs:
            shapes[spec.id] = bindings[spec.id].shape
    else:
        for spec in g.inputs:
            shapes[spec.id] = (None,) + spec.shape
        for spec in g.inputs:
            if any(d == 0 for d in spec.shape):
                if record(
                    PrecondViolation(
                        ErrorCode.E_EMPTY_OUTPUT, spec.id, expected=1, observed=0
                    )
                ):
                    return found
                shapes[spec.id] = _UNKNOWN

    nodes = g.node_map()
    for nid in topo_order(g):
        if nid in shapes:
            continue
        node = nodes[nid]
        in_shapes = [shapes.get(ref, _UNKNOWN) for ref in node.inputs]
        if any(s is _UNKNOWN for s in in_shapes):
            shapes[nid] = _UNKNOWN
            continue
        out_shape, violation = check_layer(
            node.kind,
            node.args,
            in_shapes,
            node.weights,
            node.id,
            require_weights=require_weights,
        )
        if violation is not None:
            if record(violation):
                return found
            shapes[nid] = _UNKNOWN
        else:
            shapes[nid] = out_shape
    return found


def report_json(violations: list[PrecondViolation]) -> dict:
    return {
        "valid": not violations,
        "violations": [v.to_json() for v in violations],
    }
