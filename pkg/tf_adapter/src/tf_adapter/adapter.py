"""TensorFlow/Keras backend for the layer-graph interchange format.

Implements the subprocess contract used by the nnref differential
harness: ``<cmd> <model.json> <inputs.json> <out.json> [--trace]``.
Exit 0 writes {"output": ..., "trace": {...}?} to the out file; exit 3
writes {"error": "<message>"} with the framework's rejection verbatim.

The adapter parses the interchange document itself and builds the model
with the Keras functional API. Dropout layers are wired with
training=True so they actually drop; everything else runs in inference
mode. All tensors run in float32, the framework's native precision.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Mapping, Sequence

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")

import numpy as np
import keras
from keras import layers


class ModelRejected(Exception):
    """The document cannot be turned into a runnable Keras model."""


_MERGE = {
    "Add": layers.Add,
    "Subtract": layers.Subtract,
    "Multiply": layers.Multiply,
    "Average": layers.Average,
    "Maximum": layers.Maximum,
    "Minimum": layers.Minimum,
}

_NULLARY = {
    "Flatten": layers.Flatten,
    "GlobalMaxPool1D": layers.GlobalMaxPooling1D,
    "GlobalAvgPool1D": layers.GlobalAveragePooling1D,
}


def _pair(v: Sequence, what: str) -> tuple:
    v = tuple(int(x) for x in v)
    if len(v) != 2:
        raise ModelRejected(f"{what} must have two entries, got {len(v)}")
    return v


def _quad(v: Sequence, what: str) -> tuple:
    v = tuple(int(x) for x in v)
    if len(v) != 4:
        raise ModelRejected(f"{what} must have four entries, got {len(v)}")
    return v


def make_layer(kind: str, args: Mapping):
    """Keras layer for one interchange node; raises ModelRejected."""
    a = args or {}
    if kind in _MERGE:
        return _MERGE[kind]()
    if kind in _NULLARY:
        return _NULLARY[kind]()
    if kind == "Dense":
        return layers.Dense(int(a["units"]))
    if kind == "Conv1D":
        return layers.Conv1D(
            int(a["filters"]), int(a["kernel_size"]),
            strides=int(a["strides"]), padding=str(a["padding"]),
        )
    if kind == "Conv2D":
        return layers.Conv2D(
            int(a["filters"]), _pair(a["kernel_size"], "kernel_size"),
            strides=_pair(a["strides"], "strides"), padding=str(a["padding"]),
        )
    if kind in ("MaxPool1D", "AvgPool1D"):
        cls = layers.MaxPooling1D if kind == "MaxPool1D" else layers.AveragePooling1D
        return cls(
            pool_size=int(a["pool_size"]),
            strides=int(a["strides"]), padding=str(a["padding"]),
        )
    if kind in ("MaxPool2D", "AvgPool2D"):
        cls = layers.MaxPooling2D if kind == "MaxPool2D" else layers.AveragePooling2D
        return cls(
            pool_size=_pair(a["pool_size"], "pool_size"),
            strides=_pair(a["strides"], "strides"), padding=str(a["padding"]),
        )
    if kind == "Reshape":
        return layers.Reshape(tuple(int(d) for d in a["target"]))
    if kind == "Permute":
        return layers.Permute(tuple(int(d) for d in a["order"]))
    if kind == "RepeatVector":
        return layers.RepeatVector(int(a["n"]))
    if kind == "Cropping1D":
        return layers.Cropping1D(cropping=_pair(a["cropping"], "cropping"))
    if kind == "Cropping2D":
        c = _quad(a["cropping"], "cropping")
        return layers.Cropping2D(cropping=((c[0], c[1]), (c[2], c[3])))
    if kind == "ZeroPadding1D":
        return layers.ZeroPadding1D(padding=_pair(a["padding"], "padding"))
    if kind == "ZeroPadding2D":
        p = _quad(a["padding"], "padding")
        return layers.ZeroPadding2D(padding=((p[0], p[1]), (p[2], p[3])))
    if kind == "UpSampling1D":
        return layers.UpSampling1D(size=int(a["size"]))
    if kind == "UpSampling2D":
        return layers.UpSampling2D(size=_pair(a["size"], "size"))
    if kind == "Concatenate":
        return layers.Concatenate(axis=int(a["axis"]))
    if kind == "ReLU":
        kw = {
            "negative_slope": float(a["negative_slope"]),
            "threshold": float(a["threshold"]),
        }
        if a.get("max_value") is not None:
            kw["max_value"] = float(a["max_value"])
        return layers.ReLU(**kw)
    if kind == "Activation":
        return layers.Activation(str(a["fn"]))
    if kind == "BatchNorm":
        return layers.BatchNormalization(epsilon=float(a["epsilon"]))
    if kind == "Dropout":
        return layers.Dropout(float(a["rate"]))
    if kind == "SimpleRNN":
        return layers.SimpleRNN(int(a["units"]))
    raise ModelRejected(f"unsupported layer kind: {kind!r}")


def _as_weights(values) -> list[np.ndarray]:
    try:
        return [np.asarray(w, dtype="float32") for w in values]
    except (TypeError, ValueError) as e:
        raise ModelRejected(f"malformed weights: {e}") from e


def evaluate(doc: Mapping, bindings: Mapping, trace: bool = False) -> dict:
    """Run one interchange document on bound inputs.

    Returns the backend result document. Raises ModelRejected when the
    document is malformed or the framework refuses the model; framework
    exceptions propagate with their original message.
    """
    if not isinstance(doc, Mapping):
        raise ModelRejected("model document must be a JSON object")
    if doc.get("version") != 1:
        raise ModelRejected(f"unsupported version {doc.get('version')!r}")
    specs = doc.get("inputs") or []
    layer_docs = doc.get("layers") or []
    output_id = doc.get("output")
    if not specs:
        raise ModelRejected("model has no inputs")

    known: dict[str, object] = {}
    for spec in specs:
        sid = spec["id"]
        if sid in known:
            raise ModelRejected(f"duplicate id {sid!r}")
        known[sid] = keras.Input(shape=tuple(int(d) for d in spec["shape"]))

    # Wire layers whose feeds are ready until the graph is exhausted;
    # accepts any serialization order, catches cycles and dangling refs.
    pending = list(layer_docs)
    while pending:
        rest = []
        progressed = False
        for node in pending:
            nid = node["id"]
            if nid in known:
                raise ModelRejected(f"duplicate id {nid!r}")
            feed_ids = node.get("inputs") or []
            if not all(f in known for f in feed_ids):
                rest.append(node)
                continue
            if not feed_ids:
                raise ModelRejected(f"layer {nid!r} has no inputs")
            kind = node.get("kind")
            try:
                lay = make_layer(kind, node.get("args") or {})
            except KeyError as e:
                raise ModelRejected(f"layer {nid!r}: missing argument {e}") from e
            feeds = [known[f] for f in feed_ids]
            arg = feeds[0] if len(feeds) == 1 else feeds
            if kind == "Dropout":
                known[nid] = lay(arg, training=True)
            else:
                known[nid] = lay(arg)
            if node.get("weights") is not None:
                lay.set_weights(_as_weights(node["weights"]))
            progressed = True
        if not progressed:
            defined = set(known) | {n["id"] for n in rest}
            parts = []
            for n in rest:
                missing = [f for f in n.get("inputs") or [] if f not in defined]
                if missing:
                    parts.append(f"{n['id']!r} references undefined "
                                 + ", ".join(repr(f) for f in missing))
                else:
                    parts.append(f"{n['id']!r} is part of a cycle")
            raise ModelRejected("unresolvable layer inputs: " + "; ".join(parts))
        pending = rest

    if output_id not in known:
        raise ModelRejected(f"output {output_id!r} is not a layer or input id")

    traced_ids = [s["id"] for s in specs] + [n["id"] for n in layer_docs]
    model = keras.Model(
        inputs=[known[s["id"]] for s in specs],
        outputs=[known[i] for i in traced_ids],
    )
    feeds = []
    for spec in specs:
        sid = spec["id"]
        if sid not in bindings:
            raise ModelRejected(f"no binding for input {sid!r}")
        feeds.append(np.asarray(bindings[sid], dtype="float32"))

    outs = model(feeds)
    nested = {
        nid: np.asarray(keras.ops.convert_to_numpy(t), dtype=float).tolist()
        for nid, t in zip(traced_ids, outs)
    }
    result = {"output": nested[output_id]}
    if trace:
        result["trace"] = nested
    return result


def _load_json(path: str, what: str):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise ModelRejected(f"cannot read {what} file: {e}") from e
    except json.JSONDecodeError as e:
        raise ModelRejected(f"{what} file is not valid JSON: {e}") from e


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tf-backend",
        description="Evaluate an interchange model with TensorFlow/Keras. "
        "Writes the result document to the out file; exit 0 on success, "
        "3 when the model is rejected.",
    )
    parser.add_argument("model")
    parser.add_argument("inputs")
    parser.add_argument("out")
    parser.add_argument("--trace", action="store_true")
    ns = parser.parse_args(argv)

    try:
        doc = _load_json(ns.model, "model")
        bindings = _load_json(ns.inputs, "inputs")
        result = evaluate(doc, bindings, trace=ns.trace)
    except ModelRejected as e:
        result = {"error": str(e)}
        code = 3
    except Exception as e:
        result = {"error": f"{type(e).__name__}: {e}"}
        code = 3
    else:
        code = 0
    with open(ns.out, "w", encoding="utf-8") as f:
        json.dump(result, f)
    return code


if __name__ == "__main__":
    sys.exit(main())
