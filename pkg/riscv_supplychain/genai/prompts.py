"""Prompt templates for diagram, rule, graph and query generation.

Slots are written ``[slot name]`` and substituted in one pass, so slot
values are never scanned for further slots. The pair
``[textual description]/[input diagram]`` is filled by whichever of the
two slots is given (both joined by "/" when both are).
"""

import re
from dataclasses import dataclass

from riscv_supplychain.exceptions import MissingSlotError

P1_PLANTUML = "P1_PLANTUML"
P2_RULES = "P2_RULES"
P3_GRAPH = "P3_GRAPH"
P4_QUERY = "P4_QUERY"

DESCRIPTION_SLOT = "textual description"
IMAGE_SLOT = "input diagram"
DIAGRAM_SLOT = "PlantUML activity diagram text"
EXAMPLE_GRAPH_SLOT = "example knowledge graph model"
GRAPH_SLOT = "Neo4j graph model"
RULES_SLOT = "textual rules"
USER_TEXT_SLOT = "user text"
SCHEMA_SLOT = "current graph schema"

_SLOT = re.compile(
    r"(?P<either>\[textual description\]/\[input diagram\])"
    r"|\[(?P<slot>[^\]\n]+)\]"
)


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    system: str
    user: str

    @property
    def slots(self):
        """Slot names in order of appearance, system text first."""
        names = []
        for text in (self.system, self.user):
            for match in _SLOT.finditer(text):
                if match["either"]:
                    names.extend([DESCRIPTION_SLOT, IMAGE_SLOT])
                else:
                    names.append(match["slot"])
        return list(dict.fromkeys(names))


TEMPLATES = {
    P1_PLANTUML: PromptTemplate(
        P1_PLANTUML,
        system=(
            "You are generating PlantUml activity diagram about RISC-V "
            "supply chain processes without comments and without "
            "explanations. Activity diagram should support multiple "
            "swimlanes and interaction between actors."
        ),
        user=(
            "Update given PlantUML diagram [PlantUML activity diagram text] "
            "based on given [textual description]/[input diagram]."
        ),
    ),
    P2_RULES: PromptTemplate(
        P2_RULES,
        system=(
            "You are generating validation rules for RISC-V supply chain "
            "processes without comments and without explanations. Write "
            "one rule per line as: rule <id> \"<description>\" : "
            "<form>(\"<first>\",\"<second>\") where <form> is one of "
            "before, after, after_true, after_false, not_before, role, "
            "parallel. after_true and after_false take an activity and a "
            "decision; role takes a role and an activity."
        ),
        user=(
            "For given rules: [textual rules] and activity diagram: "
            "[PlantUML activity diagram text], generate list of rules mapped "
            "to appropriate ordering constraints: before, after, "
            "after-true, after-false. Identitfy activities (A) and roles "
            "for included activities (as R:A)."
        ),
    ),
    P3_GRAPH: PromptTemplate(
        P3_GRAPH,
        system=(
            "You are generating Neo4j model about supply chain key elements "
            "- stakeholders, products, their relationships and attributes "
            "- no comments, delimiters and explanations. Just extract node "
            "labels, properties and relationships, without constriants and "
            "indices. Example of simple output is given as "
            "[example knowledge graph model]."
        ),
        user=(
            "Update given knowledge graph model [Neo4j graph model] based "
            "on given [textual description]/[input diagram]."
        ),
    ),
    P4_QUERY: PromptTemplate(
        P4_QUERY,
        system=(
            "You are generating read-only Cypher queries without comments "
            "and without explanations. Use a single MATCH clause with "
            "optional WHERE, then RETURN with optional count, ORDER BY and "
            "LIMIT."
        ),
        user=(
            "Generate a Cypher query from the [user text] using the "
            "provided Neo4j schema [current graph schema]."
        ),
    ),
}


def get_template(template_id):
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise KeyError(
            f"Unknown prompt template {template_id}; "
            f"available: {', '.join(TEMPLATES)}"
        ) from None


def _fill(template, text, slots):
    def replace(match):
        if match["either"]:
            given = [
                slots[name]
                for name in (DESCRIPTION_SLOT, IMAGE_SLOT)
                if slots.get(name) is not None
            ]
            if not given:
                raise MissingSlotError(template.id, DESCRIPTION_SLOT)
            return "/".join(given)
        name = match["slot"]
        if slots.get(name) is None:
            raise MissingSlotError(template.id, name)
        return slots[name]

    return _SLOT.sub(replace, text)


def render_prompt(template, slots):
    """Substitute slots into a template.

    Parameters
    ----------
    template : PromptTemplate or str
        Template or template id.
    slots : dict
        Slot name (without brackets) -> text. Empty text is a valid
        value; None counts as missing.

    Returns
    -------
    tuple of str
        (system text, user text)
    """
    if isinstance(template, str):
        template = get_template(template)
    return (
        _fill(template, template.system, slots),
        _fill(template, template.user, slots),
    )
