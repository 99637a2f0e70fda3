"""Generate a standalone Keras script for a model and its inputs.

The emitted source is self-contained: it embeds the graph, the weights
and the input tensors as literals, builds the network with the Keras
functional API, and prints {"output": ...} as JSON. Dropout layers are
wired with training=True so they actually drop; everything else runs in
inference mode.
"""

from __future__ import annotations

import re
from typing import Mapping

from .errors import UnsupportedKind
from .ir import ModelGraph, topo_order
from .kinds import ABSENT, LayerKind
from .tensor import Tensor

_HEADER = '''#!/usr/bin/env python
"""Standalone model evaluation script (requires keras + a backend)."""

import json

import numpy as np
import keras
from keras import layers

'''


def _safe(name: str, index: int, prefix: str) -> str:
    return f"{prefix}{index}_" + re.sub(r"[^0-9A-Za-z]", "_", name)


def _nested_literal(t: Tensor) -> str:
    return repr(t.to_nested())


def _ctor(kind: LayerKind, args: Mapping, name: str) -> str:
    """Keras constructor expression for one layer."""
    a = dict(args)
    if kind == LayerKind.DENSE:
        body = f"layers.Dense({a['units']}"
    elif kind == LayerKind.CONV1D:
        body = (
            f"layers.Conv1D({a['filters']}, {a['kernel_size']}, "
            f"strides={a['strides']}, padding={a['padding']!r}"
        )
    elif kind == LayerKind.CONV2D:
        body = (
            f"layers.Conv2D({a['filters']}, {tuple(a['kernel_size'])}, "
            f"strides={tuple(a['strides'])}, padding={a['padding']!r}"
        )
    elif kind in (LayerKind.MAXPOOL1D, LayerKind.AVGPOOL1D):
        cls = "MaxPooling1D" if kind == LayerKind.MAXPOOL1D else "AveragePooling1D"
        body = (
            f"layers.{cls}(pool_size={a['pool_size']}, "
            f"strides={a['strides']}, padding={a['padding']!r}"
        )
    elif kind in (LayerKind.MAXPOOL2D, LayerKind.AVGPOOL2D):
        cls = "MaxPooling2D" if kind == LayerKind.MAXPOOL2D else "AveragePooling2D"
        body = (
            f"layers.{cls}(pool_size={tuple(a['pool_size'])}, "
            f"strides={tuple(a['strides'])}, padding={a['padding']!r}"
        )
    elif kind == LayerKind.GLOBALMAXPOOL1D:
        body = "layers.GlobalMaxPooling1D("
    elif kind == LayerKind.GLOBALAVGPOOL1D:
        body = "layers.GlobalAveragePooling1D("
    elif kind == LayerKind.FLATTEN:
        body = "layers.Flatten("
    elif kind == LayerKind.RESHAPE:
        body = f"layers.Reshape({tuple(a['target'])}"
    elif kind == LayerKind.PERMUTE:
        body = f"layers.Permute({tuple(a['order'])}"
    elif kind == LayerKind.REPEATVECTOR:
        body = f"layers.RepeatVector({a['n']}"
    elif kind == LayerKind.CROPPING1D:
        c = tuple(a["cropping"])
        body = f"layers.Cropping1D(cropping={c}"
    elif kind == LayerKind.CROPPING2D:
        c = tuple(a["cropping"])
        body = f"layers.Cropping2D(cropping=(({c[0]}, {c[1]}), ({c[2]}, {c[3]}))"
    elif kind == LayerKind.ZEROPADDING1D:
        p = tuple(a["padding"])
        body = f"layers.ZeroPadding1D(padding={p}"
    elif kind == LayerKind.ZEROPADDING2D:
        p = tuple(a["padding"])
        body = f"layers.ZeroPadding2D(padding=(({p[0]}, {p[1]}), ({p[2]}, {p[3]}))"
    elif kind == LayerKind.UPSAMPLING1D:
        body = f"layers.UpSampling1D(size={a['size']}"
    elif kind == LayerKind.UPSAMPLING2D:
        body = f"layers.UpSampling2D(size={tuple(a['size'])}"
    elif kind == LayerKind.CONCATENATE:
        body = f"layers.Concatenate(axis={a['axis']}"
    elif kind == LayerKind.ADD:
        body = "layers.Add("
    elif kind == LayerKind.SUBTRACT:
        body = "layers.Subtract("
    elif kind == LayerKind.MULTIPLY:
        body = "layers.Multiply("
    elif kind == LayerKind.AVERAGE:
        body = "layers.Average("
    elif kind == LayerKind.MAXIMUM:
        body = "layers.Maximum("
    elif kind == LayerKind.MINIMUM:
        body = "layers.Minimum("
    elif kind == LayerKind.RELU:
        parts = [f"negative_slope={a['negative_slope']!r}"]
        if a.get("max_value") is not ABSENT and a.get("max_value") is not None:
            parts.append(f"max_value={a['max_value']!r}")
        parts.append(f"threshold={a['threshold']!r}")
        body = "layers.ReLU(" + ", ".join(parts)
    elif kind == LayerKind.ACTIVATION:
        body = f"layers.Activation({a['fn']!r}"
    elif kind == LayerKind.BATCHNORM:
        body = f"layers.BatchNormalization(epsilon={a['epsilon']!r}"
    elif kind == LayerKind.DROPOUT:
        body = f"layers.Dropout({a['rate']!r}"
    elif kind == LayerKind.SIMPLERNN:
        body = f"layers.SimpleRNN({a['units']}"
    else:
        raise UnsupportedKind(f"no script mapping for kind {kind.value}")
    sep = ", " if not body.endswith("(") else ""
    return f"{body}{sep}name={name!r})"


def emit_backend_script(g: ModelGraph, bindings: Mapping[str, Tensor]) -> str:
    """Python source that evaluates the model and prints its output."""
    order = topo_order(g)
    positions = {nid: i for i, nid in enumerate(order)}
    inputs = g.input_map()
    nodes = g.node_map()

    def vname(nid: str) -> str:
        return _safe(nid, positions[nid], "v_")

    def lname(nid: str) -> str:
        return _safe(nid, positions[nid], "lay_")

    lines = [_HEADER, "\ndef build():\n"]
    for spec in g.inputs:
        lines.append(
            f"    {vname(spec.id)} = keras.Input(shape={spec.shape!r}, "
            f"name={_safe(spec.id, positions[spec.id], 'in_')!r})\n"
        )
    weight_lines = []
    for nid in order:
        if nid in inputs:
            continue
        node = nodes[nid]
        lay = lname(nid)
        lines.append(f"    {lay} = {_ctor(node.kind, node.args, lay)}\n")
        feeds = [vname(c) for c in node.inputs]
        arg = feeds[0] if len(feeds) == 1 else "[" + ", ".join(feeds) + "]"
        call_kw = ", training=True" if node.kind == LayerKind.DROPOUT else ""
        lines.append(f"    {vname(nid)} = {lay}({arg}{call_kw})\n")
        if node.weights:
            arrays = ", ".join(
                f"np.array({_nested_literal(w)})" for w in node.weights
            )
            weight_lines.append(f"    {lay}.set_weights([{arrays}])\n")
    feed_names = ", ".join(vname(s.id) for s in g.inputs)
    lines.append(
        f"    model = keras.Model(inputs=[{feed_names}], "
        f"outputs={vname(g.output)})\n"
    )
    lines.extend(weight_lines)
    lines.append("    return model\n")

    lines.append("\n\ndef main():\n    model = build()\n    feeds = [\n")
    for spec in g.inputs:
        lines.append(
            f"        np.array({_nested_literal(bindings[spec.id])}, "
            f"dtype=\"float32\"),\n"
        )
    lines.append("    ]\n")
    lines.append("    out = model(feeds)\n")
    lines.append(
        "    print(json.dumps({\"output\": "
        "np.asarray(out, dtype=float).tolist()}))\n"
    )
    lines.append("\n\nif __name__ == \"__main__\":\n    main()\n")
    return "".join(lines)
