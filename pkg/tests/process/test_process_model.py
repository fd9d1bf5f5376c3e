import json

import pytest

from riscv_supplychain.diagram import parse_activity_diagram
from riscv_supplychain.exceptions import ModelError, SchemaError
from riscv_supplychain.process_model import (
    Edge,
    from_canonical_json,
    lower_to_model,
    matching_joins,
    model_to_dict,
    to_canonical_json,
)


def lower(body):
    return lower_to_model(
        parse_activity_diagram(f"@startuml\n{body}\n@enduml\n")
    )


def test_reference_nodes(reference_model):
    kinds = [node.kind for node in reference_model.nodes]
    assert kinds == (
        ["start"]
        + ["activity"] * 4
        + ["decision", "activity", "fork"]
        + ["activity"] * 5
        + ["join", "stop"]
    )
    assert [node.id for node in reference_model.nodes] == [
        f"n{i}" for i in range(1, 16)
    ]
    assert reference_model.node("n6").label == "Compliance Verified?"
    assert reference_model.node("n4").lane == "IP Designers"
    assert reference_model.node("n11").lane == "SoC Integrators"
    assert len(reference_model.participants) == 8


def test_reference_repeat_loop(reference_model):
    out = reference_model.out_edges("n6")
    assert out == [Edge("n6", "n4", "no"), Edge("n6", "n7", "yes")]


def test_reference_fork_and_join(reference_model):
    assert [e.target for e in reference_model.out_edges("n8")] == [
        "n9",
        "n13",
    ]
    assert matching_joins(reference_model) == {"n8": "n14"}


def test_reference_artifacts(reference_model):
    produced = {a.name: a.produced_by for a in reference_model.artifacts}
    assert len(produced) == 9
    assert produced["Simulation Report"] == "n5"
    assert produced["Operating Systems and Toolchains"] == "n13"


def test_if_without_else_gets_default_guards():
    model = lower("start\nif (Ok?) then\n  :Ship;\nendif\nstop")
    decision = [n for n in model.nodes if n.kind == "decision"][0]
    guards = [e.guard for e in model.out_edges(decision.id)]
    assert guards == ["yes", "no"]
    assert any(n.kind == "merge" for n in model.nodes)


def test_repeat_label_sets_exit_guard():
    model = lower(
        "start\nrepeat\n  :Try;\nrepeat while (Again?) is (yes)\nstop"
    )
    decision = [n for n in model.nodes if n.kind == "decision"][0]
    guards = {e.target: e.guard for e in model.out_edges(decision.id)}
    assert guards == {"n2": "yes", "n4": "no"}


@pytest.mark.parametrize(
    "body, fragment",
    [
        (":A;\nstop", "no start"),
        ("start\n:A;", "without stop"),
        ("start\nstart\nstop", "more than one start"),
        (
            "start\nif (X?) then (go)\n  :A;\nelse (go)\n  :B;\nendif\nstop",
            "two branches",
        ),
        (
            "start\nfork\n  :A;\n  stop\nfork again\n  :B;\nend fork\nstop",
            "without rejoining",
        ),
        ("start\nstop\n:Orphan;\nstop", "unreachable"),
    ],
)
def test_lowering_errors(body, fragment):
    with pytest.raises(ModelError, match=fragment):
        lower(body)


def test_canonical_json_round_trip(reference_model):
    data = to_canonical_json(reference_model)
    assert data.endswith(b"\n")
    assert b'": ' not in data and b'", ' not in data
    assert from_canonical_json(data) == reference_model
    assert to_canonical_json(from_canonical_json(data)) == data


def test_canonical_json_key_order(reference_model):
    document = json.loads(to_canonical_json(reference_model))
    assert list(document) == ["participants", "nodes", "edges", "artifacts"]
    assert list(document["nodes"][0]) == ["id", "kind", "label", "lane"]
    assert list(document["edges"][0]) == ["from", "to", "guard"]
    assert list(document["artifacts"][0]) == ["name", "produced_by"]


def _document(model):
    return model_to_dict(model)


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.pop("artifacts"), "document keys"),
        (lambda d: d["nodes"][0].update(kind="gateway"), "unknown kind"),
        (lambda d: d["edges"][0].update(to="n99"), "unknown node"),
        (lambda d: d["nodes"].append(dict(d["nodes"][1])), "duplicate"),
        (lambda d: d["nodes"][1].update(lane="Nobody"), "not a participant"),
        (lambda d: d["edges"][5].update(guard=None), "guarded"),
        (lambda d: d["nodes"][0].update(label=3), "must be a string"),
    ],
)
def test_schema_errors(reference_model, mutate, fragment):
    document = _document(reference_model)
    mutate(document)
    with pytest.raises(SchemaError, match=fragment):
        from_canonical_json(json.dumps(document))


def test_not_json():
    with pytest.raises(SchemaError, match="not a JSON document"):
        from_canonical_json(b"@startuml")
