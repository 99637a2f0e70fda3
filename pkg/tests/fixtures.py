"""Shared model documents used across test modules."""

import json

# A two-branch model where over-cropping empties the steps axis before a
# concatenation: the classic silently-empty-tensor regression. The crop
# layer must be flagged with E_EMPTY_OUTPUT.
OVERCROP_MODEL = {
    "version": 1,
    "inputs": [
        {"id": "in0", "shape": [2, 2]},
        {"id": "in1", "shape": [2, 2]},
    ],
    "layers": [
        {
            "id": "Max",
            "kind": "MaxPool1D",
            "args": {"pool_size": 1, "strides": 1, "padding": "valid"},
            "inputs": ["in0"],
        },
        {
            "id": "Con",
            "kind": "Conv1D",
            "args": {
                "filters": 2,
                "kernel_size": 1,
                "strides": 1,
                "padding": "valid",
            },
            "weights": [
                [[[0.572, 0.621], [0.5388, 0.5741]]],
                [0.0, 0.0],
            ],
            "inputs": ["in1"],
        },
        {
            "id": "Cro",
            "kind": "Cropping1D",
            "args": {"cropping": [5, 5]},
            "inputs": ["Con"],
        },
        {
            "id": "Con1",
            "kind": "Concatenate",
            "args": {"axis": 1},
            "inputs": ["Max", "Cro"],
        },
    ],
    "output": "Con1",
}

OVERCROP_INPUTS = {
    "in0": [[[1.313, 1.02], [1.45, 1.92]]],
    "in1": [[[0.9421, 0.7879], [0.809, 0.855]]],
}


def overcrop_model_text() -> str:
    return json.dumps(OVERCROP_MODEL)


def overcrop_inputs_text() -> str:
    return json.dumps(OVERCROP_INPUTS)


# Minimal single-dense model, handy for CLI and harness plumbing tests.
DENSE_MODEL = {
    "version": 1,
    "inputs": [{"id": "in0", "shape": [2]}],
    "layers": [
        {
            "id": "d0",
            "kind": "Dense",
            "args": {"units": 2},
            "weights": [[[5.0, 8.0], [7.0, 6.0]], [4.0, 3.0]],
            "inputs": ["in0"],
        }
    ],
    "output": "d0",
}

DENSE_INPUTS = {"in0": [[4.0, 9.0]]}
DENSE_EXPECTED = [[87.0, 89.0]]


def dense_model_text() -> str:
    return json.dumps(DENSE_MODEL)


def dense_inputs_text() -> str:
    return json.dumps(DENSE_INPUTS)
