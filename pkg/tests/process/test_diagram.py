import pytest

from riscv_supplychain.diagram import (
    Activity,
    DiagramAst,
    ForkBlock,
    IfBlock,
    LaneSwitch,
    Note,
    RepeatBlock,
    StartMarker,
    StopMarker,
    parse_activity_diagram,
    serialize_ast,
)
from riscv_supplychain.exceptions import DiagramParseError

REFERENCE_LANES = [
    "RISC-V International",
    "EDA Vendors",
    "IP Designers",
    "SoC Integrators",
    "Foundries",
    "OSAT Providers",
    "OEMs",
    "Software Ecosystem",
]


def test_reference_lanes_and_activities(reference_ast):
    assert reference_ast.lanes() == REFERENCE_LANES
    activities = reference_ast.activities()
    assert len(activities) == 11
    assert activities[0] == "Define ISA Specification"
    assert "Compliance Verified?" in activities


def test_reference_block_structure(reference_ast):
    blocks = [
        e
        for e in reference_ast.elements
        if isinstance(e, (RepeatBlock, ForkBlock))
    ]
    repeat, fork = blocks
    assert repeat.while_condition == "Compliance Verified?"
    assert repeat.loop_label == "no"
    assert len(fork.branches) == 2
    assert Activity("Provide OS and Tools") in fork.branches[1]


def test_serialize_is_a_fixpoint(reference_ast, reference_text):
    text = serialize_ast(reference_ast)
    assert text == reference_text
    assert parse_activity_diagram(text) == reference_ast


def test_parse_if_else():
    ast = parse_activity_diagram(
        "@startuml\n"
        "start\n"
        "if (Approved?) then (yes)\n"
        "  :Ship;\n"
        "else (no)\n"
        "  :Rework;\n"
        "endif\n"
        "stop\n"
        "@enduml\n"
    )
    assert ast.elements == (
        StartMarker(),
        IfBlock(
            condition="Approved?",
            then_label="yes",
            then_body=(Activity("Ship"),),
            else_label="no",
            else_body=(Activity("Rework"),),
        ),
        StopMarker(),
    )


def test_canonical_spacing():
    messy = (
        "@startuml\r\n"
        "' a comment\r\n"
        "   |Lane A|\r\n"
        "start\r\n"
        "\r\n"
        "      :Do it;\r\n"
        "note right:   produces: Thing\r\n"
        "stop\r\n"
        "@enduml"
    )
    ast = parse_activity_diagram(messy)
    assert ast.elements == (
        LaneSwitch("Lane A"),
        StartMarker(),
        Activity("Do it"),
        Note("produces: Thing"),
        StopMarker(),
    )
    assert serialize_ast(ast) == (
        "@startuml\n|Lane A|\nstart\n:Do it;\n"
        "note right: produces: Thing\nstop\n@enduml\n"
    )


def test_labels_are_kept_verbatim():
    ast = parse_activity_diagram(
        "@startuml\n"
        "| IP Designers |\n"
        "start\n"
        ": Develop  IP ;\n"
        "if ( Ok? ) then (yes)\n"
        "  :A;\n"
        "endif\n"
        "stop\n"
        "@enduml\n"
    )
    assert ast.elements[0] == LaneSwitch(" IP Designers ")
    assert ast.elements[2] == Activity(" Develop  IP ")
    assert ast.elements[3].condition == " Ok? "
    assert parse_activity_diagram(serialize_ast(ast)) == ast


def test_empty_diagram_round_trip():
    ast = parse_activity_diagram("@startuml\n@enduml\n")
    assert ast == DiagramAst(())
    assert serialize_ast(ast) == "@startuml\n@enduml\n"


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("start\nstop\n@enduml\n", 1, "@startuml"),
        ("@startuml\nstart\n:A;\nstop\n", 4, "@enduml"),
        ("@startuml\nstart\n:A\nstop\n@enduml\n", 3, "';'"),
        ("@startuml\nstart\nA -> B\n@enduml\n", 3, "arrows"),
        ("@startuml\nstart\ngoto x\n@enduml\n", 3, "unknown directive"),
        ("@startuml\nstart\nendif\n@enduml\n", 3, "outside"),
        ("@startuml\nnote right: orphan\n@enduml\n", 2, "note"),
        ("@startuml\nfork\n  :A;\nend fork\n@enduml\n", 2, "two branches"),
        ("@startuml\n@enduml\nstart\n", 3, "after '@enduml'"),
    ],
)
def test_parse_errors(text, line, fragment):
    with pytest.raises(DiagramParseError) as error:
        parse_activity_diagram(text, source_name="bad.puml")
    assert error.value.line == line
    assert fragment in error.value.message
    assert str(error.value).startswith(f"bad.puml:{line}:")


def test_unterminated_if_points_at_enduml():
    text = (
        "@startuml\n"
        "start\n"
        "if (Ready?) then (yes)\n"
        "  :Go;\n"
        "stop\n"
        "@enduml\n"
    )
    with pytest.raises(DiagramParseError) as error:
        parse_activity_diagram(text)
    assert error.value.line == 6
    assert "endif" in error.value.message
    assert "line 3" in error.value.message


def test_error_feedback_carries_snippet():
    with pytest.raises(DiagramParseError) as error:
        parse_activity_diagram("@startuml\n  :Broken\n@enduml\n")
    feedback = error.value.feedback()
    assert feedback.startswith("Line 2, column")
    assert ":Broken" in feedback


def test_tree_view(reference_ast):
    tree = reference_ast.tree
    shown = tree.show(stdout=False)
    assert "repeat while (Compliance Verified?)" in shown
    assert "branch 1" in shown
    assert tree.depth() >= 2
