import pytest

from riscv_supplychain.exceptions import MissingSlotError
from riscv_supplychain.genai.prompts import (
    DESCRIPTION_SLOT,
    DIAGRAM_SLOT,
    EXAMPLE_GRAPH_SLOT,
    GRAPH_SLOT,
    IMAGE_SLOT,
    P1_PLANTUML,
    P2_RULES,
    P3_GRAPH,
    P4_QUERY,
    SCHEMA_SLOT,
    TEMPLATES,
    USER_TEXT_SLOT,
    get_template,
    render_prompt,
)


def test_template_ids():
    assert list(TEMPLATES) == [P1_PLANTUML, P2_RULES, P3_GRAPH, P4_QUERY]


def test_slots_in_order():
    assert TEMPLATES[P1_PLANTUML].slots == [
        DIAGRAM_SLOT,
        DESCRIPTION_SLOT,
        IMAGE_SLOT,
    ]
    assert TEMPLATES[P3_GRAPH].slots == [
        EXAMPLE_GRAPH_SLOT,
        GRAPH_SLOT,
        DESCRIPTION_SLOT,
        IMAGE_SLOT,
    ]
    assert TEMPLATES[P4_QUERY].slots == [USER_TEXT_SLOT, SCHEMA_SLOT]


def test_render_plantuml_prompt():
    system, user = render_prompt(
        P1_PLANTUML, {DIAGRAM_SLOT: "D", DESCRIPTION_SLOT: "T"}
    )
    assert system.startswith("You are generating PlantUml activity diagram")
    assert user == "Update given PlantUML diagram D based on given T."


def test_description_and_image_are_joined():
    _, user = render_prompt(
        P1_PLANTUML,
        {DIAGRAM_SLOT: "", DESCRIPTION_SLOT: "T", IMAGE_SLOT: "picture"},
    )
    assert user.endswith("based on given T/picture.")
    _, user = render_prompt(
        P1_PLANTUML, {DIAGRAM_SLOT: "", IMAGE_SLOT: "picture"}
    )
    assert user.endswith("based on given picture.")


def test_empty_slot_is_valid():
    _, user = render_prompt(
        P1_PLANTUML, {DIAGRAM_SLOT: "", DESCRIPTION_SLOT: ""}
    )
    assert user == "Update given PlantUML diagram  based on given ."


def test_slot_values_are_not_rescanned():
    _, user = render_prompt(
        P4_QUERY, {USER_TEXT_SLOT: "[current graph schema]", SCHEMA_SLOT: "S"}
    )
    assert user == (
        "Generate a Cypher query from the [current graph schema] using the "
        "provided Neo4j schema S."
    )


@pytest.mark.parametrize(
    "template_id, slots, missing",
    [
        (P1_PLANTUML, {DESCRIPTION_SLOT: "T"}, DIAGRAM_SLOT),
        (P1_PLANTUML, {DIAGRAM_SLOT: "D"}, DESCRIPTION_SLOT),
        (P4_QUERY, {USER_TEXT_SLOT: "q", SCHEMA_SLOT: None}, SCHEMA_SLOT),
        (P3_GRAPH, {GRAPH_SLOT: "", DESCRIPTION_SLOT: "T"},
         EXAMPLE_GRAPH_SLOT),
    ],
)
def test_missing_slot(template_id, slots, missing):
    with pytest.raises(MissingSlotError) as error:
        render_prompt(template_id, slots)
    assert error.value.slot == missing
    assert error.value.template_id == template_id
    assert str(error.value) == f"{template_id}: missing slot [{missing}]"


def test_template_object_is_accepted():
    template = get_template(P4_QUERY)
    assert render_prompt(
        template, {USER_TEXT_SLOT: "q", SCHEMA_SLOT: "s"}
    ) == render_prompt(P4_QUERY, {USER_TEXT_SLOT: "q", SCHEMA_SLOT: "s"})


def test_unknown_template():
    with pytest.raises(KeyError, match="available"):
        get_template("P9")
