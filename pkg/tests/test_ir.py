"""Model document parsing, serialization, ordering and error taxonomy."""

import json

import pytest

from nnref.errors import (
    BadArity,
    CycleDetected,
    DanglingEdge,
    MalformedDocument,
    UnknownKind,
)
from nnref.ir import (
    canonical_layer_order,
    load_model,
    parse_bindings,
    parse_model,
    serialize_model,
    subgraph,
    topo_order,
)
from fixtures import OVERCROP_MODEL, overcrop_model_text


def _doc(**overrides):
    doc = json.loads(overcrop_model_text())
    doc.update(overrides)
    return doc


def test_parse_two_branch_model():
    g = parse_model(overcrop_model_text())
    assert [s.id for s in g.inputs] == ["in0", "in1"]
    assert {l.id for l in g.layers} == {"Max", "Con", "Cro", "Con1"}
    assert g.output == "Con1"
    con = g.node_map()["Con"]
    assert con.weights[0].shape == (1, 2, 2)
    assert con.weights[1].shape == (2,)


def test_topo_order_keeps_declaration_positions():
    g = parse_model(overcrop_model_text())
    assert topo_order(g) == ["in0", "in1", "Max", "Con", "Cro", "Con1"]


def test_topo_order_respects_edges_over_declaration():
    doc = _doc()
    doc["layers"] = list(reversed(doc["layers"]))
    g = parse_model(json.dumps(doc))
    order = topo_order(g)
    assert order.index("Con") < order.index("Cro")
    assert order.index("Cro") < order.index("Con1")
    assert order.index("Max") < order.index("Con1")
    assert order[:2] == ["in0", "in1"]


def test_serialization_round_trips():
    g = parse_model(overcrop_model_text())
    text = serialize_model(g)
    again = parse_model(text)
    assert again == g
    assert serialize_model(again) == text


def test_serialization_is_permutation_invariant():
    base = serialize_model(parse_model(overcrop_model_text()))
    doc = _doc()
    doc["layers"] = list(reversed(doc["layers"]))
    assert serialize_model(parse_model(json.dumps(doc))) == base
    assert [l.id for l in parse_model(base).layers] == canonical_layer_order(
        parse_model(base)
    )


def test_canonical_text_is_stable_bytes(tmp_path):
    g = parse_model(overcrop_model_text())
    path = tmp_path / "m.json"
    path.write_text(serialize_model(g) + "\n", encoding="utf-8")
    assert serialize_model(load_model(path)) == serialize_model(g)


def test_defaulted_args_are_filled_on_parse():
    doc = _doc()
    # drop strides/padding from the conv; defaults must come back
    doc["layers"][1]["args"] = {"filters": 2, "kernel_size": 1}
    g = parse_model(json.dumps(doc))
    con = g.node_map()["Con"]
    assert con.args["strides"] == 1
    assert con.args["padding"] == "valid"


def test_subgraph_prunes_unreachable():
    g = parse_model(overcrop_model_text())
    sub = subgraph(g, "Cro")
    assert {l.id for l in sub.layers} == {"Con", "Cro"}
    assert [s.id for s in sub.inputs] == ["in1"]
    assert sub.output == "Cro"


# --- error taxonomy ---


def test_unknown_version_rejected():
    with pytest.raises(MalformedDocument):
        parse_model(json.dumps(_doc(version=2)))


def test_unknown_kind():
    doc = _doc()
    doc["layers"][0]["kind"] = "FancyNewLayer"
    with pytest.raises(UnknownKind):
        parse_model(json.dumps(doc))


def test_input_kind_not_allowed_in_layers():
    doc = _doc()
    doc["layers"][0] = {
        "id": "bad",
        "kind": "Input",
        "args": {},
        "inputs": ["in0"],
    }
    with pytest.raises(MalformedDocument):
        parse_model(json.dumps(doc))


def test_bad_arity():
    doc = _doc()
    doc["layers"][1]["inputs"] = ["in0", "in1"]  # conv takes one input
    with pytest.raises(BadArity):
        parse_model(json.dumps(doc))


def test_cycle_detected():
    doc = _doc()
    doc["layers"][1]["inputs"] = ["Cro"]  # Con <- Cro <- Con
    with pytest.raises(CycleDetected):
        parse_model(json.dumps(doc))


def test_dangling_edge():
    doc = _doc()
    doc["layers"][0]["inputs"] = ["nowhere"]
    with pytest.raises(DanglingEdge):
        parse_model(json.dumps(doc))


def test_dangling_output():
    with pytest.raises(DanglingEdge):
        parse_model(json.dumps(_doc(output="nope")))


def test_duplicate_ids_rejected():
    doc = _doc()
    doc["layers"][1]["id"] = "Max"
    with pytest.raises(MalformedDocument):
        parse_model(json.dumps(doc))


def test_unreachable_layer_rejected():
    doc = _doc(output="Cro")
    with pytest.raises(MalformedDocument):
        parse_model(json.dumps(doc))


def test_unknown_top_level_key_rejected():
    with pytest.raises(MalformedDocument):
        parse_model(json.dumps(_doc(extra=1)))


def test_unknown_arg_rejected():
    doc = _doc()
    doc["layers"][0]["args"]["zoom"] = 2
    with pytest.raises(MalformedDocument):
        parse_model(json.dumps(doc))


def test_missing_required_arg_rejected():
    doc = _doc()
    del doc["layers"][1]["args"]["filters"]
    with pytest.raises(MalformedDocument):
        parse_model(json.dumps(doc))


def test_bool_is_not_an_int_arg():
    doc = _doc()
    doc["layers"][0]["args"]["pool_size"] = True
    with pytest.raises(MalformedDocument):
        parse_model(json.dumps(doc))


def test_wrong_weight_count_rejected():
    doc = _doc()
    doc["layers"][1]["weights"] = [[[[0.5, 0.5], [0.5, 0.5]]]]  # bias missing
    with pytest.raises(MalformedDocument):
        parse_model(json.dumps(doc))


def test_invalid_json_is_malformed():
    with pytest.raises(MalformedDocument):
        parse_model("{not json")


def test_non_integer_input_shape_rejected():
    doc = _doc()
    doc["inputs"][0]["shape"] = [2, 2.5]
    with pytest.raises(MalformedDocument):
        parse_model(json.dumps(doc))


# --- bindings ---


def test_bindings_round_trip():
    g = parse_model(overcrop_model_text())
    text = json.dumps(
        {"in0": [[[1.0, 2.0], [3.0, 4.0]]], "in1": [[[5.0, 6.0], [7.0, 8.0]]]}
    )
    b = parse_bindings(text, g)
    assert b["in0"].shape == (1, 2, 2)


def test_bindings_missing_input():
    g = parse_model(overcrop_model_text())
    with pytest.raises(MalformedDocument):
        parse_bindings(json.dumps({"in0": [[[1.0, 2.0], [3.0, 4.0]]]}), g)


def test_bindings_unknown_key():
    g = parse_model(overcrop_model_text())
    text = json.dumps(
        {
            "in0": [[[1.0, 2.0], [3.0, 4.0]]],
            "in1": [[[1.0, 2.0], [3.0, 4.0]]],
            "in9": [[1.0]],
        }
    )
    with pytest.raises(MalformedDocument):
        parse_bindings(text, g)


def test_bindings_ragged_value_is_malformed():
    g = parse_model(overcrop_model_text())
    text = json.dumps(
        {"in0": [[[1.0, 2.0], [3.0]]], "in1": [[[5.0, 6.0], [7.0, 8.0]]]}
    )
    with pytest.raises(MalformedDocument):
        parse_bindings(text, g)
