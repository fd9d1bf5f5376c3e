"""Model-backed extraction with parser-gated retries.

Every answer is parsed by the deterministic parsers before it is
returned. An answer that fails to parse is fed back as an additional
user turn carrying the parser error, up to ``max_retries`` times.
"""

import re
import time
from pathlib import Path

from loguru import logger

from riscv_supplychain.cfg import build_cfg
from riscv_supplychain.descriptors import EXAMPLE_GRAPH_FILENAME
from riscv_supplychain.diagram import (
    Activity,
    DiagramAst,
    LaneSwitch,
    StartMarker,
    StopMarker,
    parse_activity_diagram,
    serialize_ast,
)
from riscv_supplychain.exceptions import (
    EndpointError,
    ExtractionError,
    ModelError,
    ParseError,
)
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
    RULES_SLOT,
    SCHEMA_SLOT,
    USER_TEXT_SLOT,
    render_prompt,
)
from riscv_supplychain.genai.transport import Transcript, image_content
from riscv_supplychain.kg.analytics import graph_schema
from riscv_supplychain.kg.graph import PropertyGraph
from riscv_supplychain.kg.query import parse_query
from riscv_supplychain.kg.script import export_script, ingest_script
from riscv_supplychain.process_model import ProcessModel, lower_to_model
from riscv_supplychain.rules import Role, parse_rules
from riscv_supplychain.utils import normalize_label, read_fixture

_FENCE = re.compile(r"^\s*```[\w+-]*[ \t]*\n(?P<body>.*?)\n\s*```\s*$", re.S)


def strip_code_fences(text):
    """Body of a Markdown code fence wrapping the whole answer."""
    match = _FENCE.match(text)
    return match["body"] if match else text.strip("\n")


def _feedback(error):
    if isinstance(error, ParseError):
        detail = error.feedback()
    else:
        detail = str(error)
    return (
        "The output could not be parsed:\n"
        f"{detail}\n"
        "Answer again with the corrected output only."
    )


def _max_retries(transport, max_retries):
    if max_retries is not None:
        return max_retries
    return getattr(transport, "max_retries", 3)


def run_with_retries(
    template_id,
    slots,
    transport,
    validate,
    max_retries=None,
    image=None,
    transcript=None,
):
    """Prompt, parse and re-prompt until ``validate`` accepts an answer.

    Parameters
    ----------
    template_id : str
    slots : dict
    transport : object with ``complete(messages) -> str``
    validate : callable
        Turns answer text into a result; raises ParseError or ModelError
        to reject it.
    max_retries : int, optional
        Defaults to the transport's setting.
    image : str or Path, optional
        Image attached to the first user turn.
    transcript : Transcript, optional
        Receives one entry per call.

    Returns
    -------
    object
        What ``validate`` returned.
    """
    retries = _max_retries(transport, max_retries)
    if transcript is None:
        transcript = Transcript()
    system, user = render_prompt(template_id, slots)
    user_content = user
    if image is not None:
        user_content = [{"type": "text", "text": user}, image_content(image)]
    messages = [
        {"role": "system", "content": system},
        {"role": "user", "content": user_content},
    ]

    last_error = None
    for attempt in range(retries + 1):
        started = time.monotonic()
        try:
            answer = transport.complete(messages)
        except EndpointError as error:
            transcript.record(
                attempt, messages, "", f"endpoint error: {error}", started
            )
            raise
        try:
            result = validate(strip_code_fences(answer))
        except (ParseError, ModelError) as error:
            last_error = error
            transcript.record(
                attempt, messages, answer, f"error: {error}", started
            )
            logger.info(
                f"{template_id} attempt {attempt + 1}/{retries + 1} "
                f"rejected: {error}"
            )
            messages = messages + [
                {"role": "assistant", "content": answer},
                {"role": "user", "content": _feedback(error)},
            ]
            continue
        transcript.record(attempt, messages, answer, "ok", started)
        logger.debug(f"{template_id} accepted on attempt {attempt + 1}")
        return result

    raise ExtractionError(
        f"{template_id}: no parseable answer after {retries + 1} attempts; "
        f"last error: {last_error}",
        last_error=last_error,
        transcript=transcript,
    )


# ------------------------------- #
#   PRIOR RENDERING               #
# ------------------------------- #


def model_outline(model):
    """PlantUML outline of a process model: its activity and decision
    labels in node order, each in its lane."""
    nodes = model.labelled_nodes()
    elements = []
    lane = None
    if nodes and nodes[0].lane:
        lane = nodes[0].lane
        elements.append(LaneSwitch(lane))
    elements.append(StartMarker())
    for node in nodes:
        if node.lane and node.lane != lane:
            elements.append(LaneSwitch(node.lane))
            lane = node.lane
        elements.append(Activity(node.label))
    elements.append(StopMarker())
    return serialize_ast(DiagramAst(tuple(elements)))


def diagram_text(prior):
    """Diagram text of a prior: text as is, a syntax tree serialized, a
    model as an outline, nothing as an empty string."""
    if prior is None:
        return ""
    if isinstance(prior, str):
        return prior
    if isinstance(prior, DiagramAst):
        return serialize_ast(prior)
    if isinstance(prior, ProcessModel):
        return model_outline(prior)
    raise TypeError(f"Cannot render {type(prior).__name__} as a diagram")


def _description_slots(description, image):
    slots = {DESCRIPTION_SLOT: description}
    if image is not None:
        slots[IMAGE_SLOT] = f"attached image {Path(image).name}"
        if not description:
            slots[DESCRIPTION_SLOT] = None
    return slots


# ------------------------------- #
#   EXTRACTIONS                   #
# ------------------------------- #


def extract_process_diagram(
    description, prior=None, transport=None, **kwargs
):
    """Diagram syntax tree of a process description. The answer must
    both parse and lower to a valid process model."""

    def validate(text):
        ast = parse_activity_diagram(text, source_name="<answer>")
        lower_to_model(ast)
        return ast

    slots = _description_slots(description, kwargs.get("image"))
    slots[DIAGRAM_SLOT] = diagram_text(prior)
    return run_with_retries(P1_PLANTUML, slots, transport, validate, **kwargs)


def extract_process(description, prior=None, transport=None, **kwargs):
    """Process model of a textual (or pictured) process description.

    Parameters
    ----------
    description : str
    prior : ProcessModel, DiagramAst or str, optional
        Diagram to update.
    transport : object with ``complete(messages) -> str``
    **kwargs
        ``max_retries``, ``image`` and ``transcript`` as in
        ``run_with_retries``.

    Returns
    -------
    ProcessModel
    """
    ast = extract_process_diagram(description, prior, transport, **kwargs)
    return lower_to_model(ast)


def extract_graph(description, prior=None, transport=None, **kwargs):
    """Property graph of a supply-chain description, optionally updating
    ``prior`` (a PropertyGraph or script text)."""
    if isinstance(prior, PropertyGraph):
        prior = export_script(prior)
    slots = _description_slots(description, kwargs.get("image"))
    slots[GRAPH_SLOT] = prior or ""
    slots[EXAMPLE_GRAPH_SLOT] = read_fixture(EXAMPLE_GRAPH_FILENAME)

    def validate(text):
        return ingest_script(text, source_name="<answer>")

    return run_with_retries(P3_GRAPH, slots, transport, validate, **kwargs)


def _warn_unresolved(rules, model):
    cfg = build_cfg(model)
    lanes = {normalize_label(lane) for lane in model.participants}
    for rule in rules:
        labels = rule.args[1:] if isinstance(rule.body, Role) else rule.args
        for label in labels:
            if not cfg.nodes_for(label):
                logger.warning(
                    f"rule {rule.id}: '{label}' matches no activity or "
                    "decision of the model"
                )
        if (
            isinstance(rule.body, Role)
            and normalize_label(rule.body.role) not in lanes
        ):
            logger.warning(
                f"rule {rule.id}: role '{rule.body.role}' is not a "
                "participant of the model"
            )


def formalize_rules(free_text, model, transport=None, diagram=None, **kwargs):
    """Rules formalized from free text against a process model.

    Labels that do not resolve against the model are kept and reported
    as warnings.
    """
    slots = {
        RULES_SLOT: free_text,
        DIAGRAM_SLOT: diagram_text(diagram if diagram is not None else model),
    }

    def validate(text):
        return parse_rules(text, source_name="<answer>")

    rules = run_with_retries(P2_RULES, slots, transport, validate, **kwargs)
    _warn_unresolved(rules, model)
    return rules


def nl_to_query(user_text, graph, transport=None, **kwargs):
    """Query AST generated from a natural-language request."""
    slots = {USER_TEXT_SLOT: user_text, SCHEMA_SLOT: graph_schema(graph)}

    def validate(text):
        return parse_query(text, source_name="<answer>")

    return run_with_retries(P4_QUERY, slots, transport, validate, **kwargs)
