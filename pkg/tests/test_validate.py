"""Validator behavior: localization, error taxonomy, badness, templates."""

import json
import re

import pytest
from hypothesis import given, strategies as st

from fixtures import dense_model_text, overcrop_model_text
from nnref.errors import PrecondViolationError
from nnref.ir import parse_model
from nnref.kinds import LayerKind
from nnref.shapes import check_layer
from nnref.semantics import eval_model
from nnref.tensor import Tensor
from nnref.validate import report_json, validate_model
from nnref.violations import (
    CATEGORY,
    MESSAGE_TEMPLATE,
    SEVERITY,
    ErrorCode,
    PrecondViolation,
)

CATEGORIES = {"Dimension Error", "Inconsistent Input Shapes", "Argument Error"}


def model(inputs, layers, output):
    doc = {"version": 1, "inputs": inputs, "layers": layers, "output": output}
    return parse_model(json.dumps(doc))


def filled_bindings(g, value=0.5):
    return {spec.id: Tensor.filled((1,) + spec.shape, value) for spec in g.inputs}


# --- regression: the over-cropped branch ---


def test_overcrop_is_localized_to_the_cropping_layer():
    g = parse_model(overcrop_model_text())
    violations = validate_model(g)
    assert len(violations) == 1
    v = violations[0]
    assert v.code is ErrorCode.E_EMPTY_OUTPUT
    assert v.layer_id == "Cro"
    assert v.category == "Argument Error"
    assert v.badness == 4
    assert v.message == "empty output: expected extent 1, observed 0"


def test_overcrop_report_json_document():
    g = parse_model(overcrop_model_text())
    doc = report_json(validate_model(g))
    assert doc["valid"] is False
    (entry,) = doc["violations"]
    assert entry["code"] == "E_EMPTY_OUTPUT"
    assert entry["layer"] == "Cro"
    assert entry["category"] == "Argument Error"
    assert set(entry) >= {"code", "category", "layer", "message", "badness"}


def test_valid_model_has_no_violations():
    g = parse_model(dense_model_text())
    assert validate_model(g) == []
    assert report_json([]) == {"valid": True, "violations": []}


# --- single-fault localization agrees with the evaluator ---

FAULT_CASES = [
    pytest.param(
        [{"id": "in0", "shape": [2]}],
        [{"id": "d0", "kind": "Dense", "args": {"units": 1},
          "weights": [[[8.0, 4.0], [2.0, 7.0], [3.0, 9.0]], [7.0]],
          "inputs": ["in0"]}],
        "d0", ErrorCode.E_WEIGHT_SHAPE, "d0", 2, 3,
        id="dense-kernel-rows",
    ),
    pytest.param(
        [{"id": "in0", "shape": [3, 2]}],
        [{"id": "c0", "kind": "Conv1D",
          "args": {"filters": 1, "kernel_size": 5, "strides": 1,
                   "padding": "valid"},
          "weights": [[[[0.0], [0.0]]] * 5, [0.0]],
          "inputs": ["in0"]}],
        "c0", ErrorCode.E_KERNEL_TOO_LARGE, "c0", 3, 5,
        id="conv-window-exceeds-input",
    ),
    pytest.param(
        [{"id": "in0", "shape": [4]}, {"id": "in1", "shape": [4]}],
        [{"id": "m0", "kind": "Concatenate", "args": {"axis": 2},
          "inputs": ["in0", "in1"]}],
        "m0", ErrorCode.E_AXIS_OOB, "m0", 1, 2,
        id="concat-axis-out-of-bounds",
    ),
    pytest.param(
        [{"id": "in0", "shape": [4]}, {"id": "in1", "shape": [3]}],
        [{"id": "m0", "kind": "Add", "args": {}, "inputs": ["in0", "in1"]}],
        "m0", ErrorCode.E_INPUT_SHAPE_INCONSISTENT, "m0", 4, 3,
        id="elementwise-extent-mismatch",
    ),
    pytest.param(
        [{"id": "in0", "shape": [4]}],
        [{"id": "c0", "kind": "Conv1D",
          "args": {"filters": 1, "kernel_size": 1, "strides": 1,
                   "padding": "valid"},
          "weights": [[[[1.0]]], [0.0]],
          "inputs": ["in0"]}],
        "c0", ErrorCode.E_DIM, "c0", 3, 2,
        id="conv-needs-rank-3",
    ),
    pytest.param(
        [{"id": "in0", "shape": [4]}],
        [{"id": "r0", "kind": "Reshape", "args": {"target": [5]},
          "inputs": ["in0"]}],
        "r0", ErrorCode.E_ARG_INVALID, "r0", 4, 5,
        id="reshape-element-count",
    ),
    pytest.param(
        [{"id": "in0", "shape": [2, 3]}],
        [{"id": "p0", "kind": "Permute", "args": {"order": [1]},
          "inputs": ["in0"]}],
        "p0", ErrorCode.E_ARG_INVALID, "p0", 2, 1,
        id="permute-order-too-short",
    ),
    pytest.param(
        [{"id": "in0", "shape": [3, 2]}],
        [{"id": "k0", "kind": "Cropping1D", "args": {"cropping": [2, 1]},
          "inputs": ["in0"]}],
        "k0", ErrorCode.E_EMPTY_OUTPUT, "k0", 1, 0,
        id="crop-consumes-all-steps",
    ),
]


@pytest.mark.parametrize(
    "inputs,layers,output,code,layer,expected,observed", FAULT_CASES
)
def test_validator_localizes_single_faults(
    inputs, layers, output, code, layer, expected, observed
):
    g = model(inputs, layers, output)
    violations = validate_model(g)
    assert len(violations) == 1
    v = violations[0]
    assert (v.code, v.layer_id) == (code, layer)
    assert (v.expected, v.observed) == (expected, observed)
    assert v.category in CATEGORIES


@pytest.mark.parametrize(
    "inputs,layers,output,code,layer,expected,observed", FAULT_CASES
)
def test_evaluator_raises_the_same_violation(
    inputs, layers, output, code, layer, expected, observed
):
    g = model(inputs, layers, output)
    with pytest.raises(PrecondViolationError) as err:
        eval_model(g, filled_bindings(g))
    v = err.value.violation
    assert (v.code, v.layer_id) == (code, layer)


def test_arity_violation_from_rule_table():
    shape = (None, 4)
    _, v = check_layer(LayerKind.SUBTRACT, {}, [shape, shape, shape], [], "s0")
    assert v.code is ErrorCode.E_ARITY
    assert (v.expected, v.observed) == (2, 3)


def test_empty_declared_input_flagged_without_bindings():
    g = model([{"id": "in0", "shape": [0, 2]}],
              [{"id": "f0", "kind": "Flatten", "args": {}, "inputs": ["in0"]}],
              "f0")
    violations = validate_model(g)
    assert violations[0].code is ErrorCode.E_EMPTY_OUTPUT
    assert violations[0].layer_id == "in0"


# --- first-violation vs. --all mode ---

TWO_FAULTS = (
    [{"id": "in0", "shape": [2, 1]}, {"id": "in1", "shape": [2, 1]}],
    [
        {"id": "a", "kind": "Cropping1D", "args": {"cropping": [3, 3]},
         "inputs": ["in0"]},
        {"id": "b", "kind": "Cropping1D", "args": {"cropping": [4, 4]},
         "inputs": ["in1"]},
        {"id": "m", "kind": "Concatenate", "args": {"axis": 1},
         "inputs": ["a", "b"]},
    ],
    "m",
)


def test_first_violation_mode_stops_at_one():
    g = model(*TWO_FAULTS)
    assert len(validate_model(g)) == 1


def test_all_violations_reports_independent_faults_only():
    g = model(*TWO_FAULTS)
    violations = validate_model(g, all_violations=True)
    # both branch faults, but not the concat whose inputs are unknown
    assert sorted(v.layer_id for v in violations) == ["a", "b"]


def test_downstream_of_a_fault_is_not_blamed():
    g = model(
        [{"id": "in0", "shape": [2, 1]}],
        [
            {"id": "a", "kind": "Cropping1D", "args": {"cropping": [3, 3]},
             "inputs": ["in0"]},
            {"id": "d", "kind": "Dense", "args": {"units": 3},
             "weights": [[[1.0]], [0.0, 0.0, 0.0]], "inputs": ["a"]},
        ],
        "d",
    )
    violations = validate_model(g, all_violations=True)
    assert [v.layer_id for v in violations] == ["a"]


def test_require_weights_false_defers_weight_checks():
    doc = json.loads(dense_model_text())
    del doc["layers"][0]["weights"]
    g = parse_model(json.dumps(doc))
    assert validate_model(g, require_weights=False) == []
    v = validate_model(g)[0]
    assert v.code is ErrorCode.E_WEIGHT_SHAPE
    assert v.detail == "missing weights"


# --- taxonomy invariants ---


def test_every_code_is_classified_and_templated():
    for code in ErrorCode:
        assert CATEGORY[code] in CATEGORIES
        assert SEVERITY[code] >= 1
        assert "{expected}" in MESSAGE_TEMPLATE[code]
        assert "{observed}" in MESSAGE_TEMPLATE[code]


def test_badness_is_severity_times_distance():
    assert PrecondViolation(ErrorCode.E_DIM, "x", 2, 4).badness == 20
    assert PrecondViolation(ErrorCode.E_DIM, "x", 3, 2).badness == 10
    assert PrecondViolation(ErrorCode.E_DIM, "x", 3, 3).badness == 10
    assert PrecondViolation(ErrorCode.E_WEIGHT_SHAPE, "x").badness == 2
    assert PrecondViolation(ErrorCode.E_EMPTY_OUTPUT, "x", 1, 0).badness == 4
    assert PrecondViolation(ErrorCode.E_ARITY, "x", 2, 5).badness == 24


def test_missing_numbers_render_as_question_marks():
    v = PrecondViolation(ErrorCode.E_ARG_INVALID, "x", detail="order")
    assert v.message == "invalid argument: expected ?, observed ?"


@given(
    st.sampled_from(list(ErrorCode)),
    st.integers(-20, 20), st.integers(-20, 20),
    st.integers(-20, 20), st.integers(-20, 20),
)
def test_same_code_means_same_message_template(code, e1, o1, e2, o2):
    mask = lambda s: re.sub(r"-?\d+", "#", s)
    a = PrecondViolation(code, "x", e1, o1)
    b = PrecondViolation(code, "y", e2, o2)
    assert mask(a.message) == mask(b.message)
    assert a.badness == SEVERITY[code] * max(1, abs(e1 - o1))


def test_validator_and_evaluator_agree_on_the_valid_fixture():
    g = parse_model(dense_model_text())
    assert validate_model(g) == []
    out = eval_model(g, filled_bindings(g))
    assert out.output.shape == (1, 2)
