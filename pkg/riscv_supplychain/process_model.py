"""Canonical process model (the "PlantUML2JSON" form) and the lowering of
diagram syntax trees into it.
"""

import json
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
from loguru import logger

from riscv_supplychain import descriptors
from riscv_supplychain.descriptors import (
    ARTIFACT_NOTE_PREFIX,
    DEFAULT_FALSE_GUARD,
    DEFAULT_TRUE_GUARD,
    FALSE_GUARDS,
    NODE_KINDS,
    TRUE_GUARDS,
)
from riscv_supplychain.diagram import (
    Activity,
    ForkBlock,
    IfBlock,
    LaneSwitch,
    Note,
    RepeatBlock,
    StartMarker,
    StopMarker,
)
from riscv_supplychain.exceptions import ModelError, SchemaError
from riscv_supplychain.utils import canonical_dumps

_VIRTUAL_EXIT = "__exit__"


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    label: str = ""
    lane: str | None = None


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    guard: str | None = None


@dataclass(frozen=True)
class Artifact:
    name: str
    produced_by: str


@dataclass(frozen=True)
class ProcessModel:
    """Participants, typed nodes, guarded edges and artifacts of a
    process.

    Parameters
    ----------
    participants : tuple of str
        Lane names in order of first appearance.
    nodes : tuple of Node
    edges : tuple of Edge
    artifacts : tuple of Artifact
    """

    participants: tuple = ()
    nodes: tuple = ()
    edges: tuple = ()
    artifacts: tuple = ()

    @cached_property
    def node_map(self):
        return {node.id: node for node in self.nodes}

    def node(self, node_id):
        return self.node_map[node_id]

    def out_edges(self, node_id):
        return [edge for edge in self.edges if edge.source == node_id]

    def labelled_nodes(self):
        """Activity and decision nodes, in id order."""
        return [
            n for n in self.nodes if n.kind in descriptors.LABELLED_KINDS
        ]

    @property
    def start(self):
        starts = [n.id for n in self.nodes if n.kind == "start"]
        return starts[0] if starts else None


def is_true_guard(guard):
    return guard is not None and guard.strip().lower() in TRUE_GUARDS


def is_false_guard(guard):
    return guard is not None and guard.strip().lower() in FALSE_GUARDS


def _opposite_guard(label):
    """Guard of the exit edge of a repeat loop whose back-edge carries
    ``label``."""
    if label is None or is_true_guard(label):
        return DEFAULT_FALSE_GUARD
    if is_false_guard(label):
        return DEFAULT_TRUE_GUARD
    return f"not {label}"


# ------------------------------- #
#   LOWERING                      #
# ------------------------------- #


class _Lowering:
    def __init__(self):
        self.nodes = []
        self.edges = []
        self.artifacts = []
        self.participants = []
        self.lane = None

    def new_node(self, kind, pending, label=""):
        node = Node(f"n{len(self.nodes) + 1}", kind, label, self.lane)
        self.nodes.append(node)
        for source, guard in pending:
            self.edges.append(Edge(source, node.id, guard))
        return node.id

    def body(self, elements, pending):
        """Lower a list of elements; ``pending`` holds the (node id, guard)
        exits waiting for the next node. Returns the exits left over.
        """
        previous_activity = None
        for element in elements:
            if isinstance(element, LaneSwitch):
                self.lane = element.lane
                if element.lane not in self.participants:
                    self.participants.append(element.lane)
            elif isinstance(element, StartMarker):
                if any(n.kind == "start" for n in self.nodes):
                    raise ModelError("diagram has more than one start")
                pending = [(self.new_node("start", pending), None)]
            elif isinstance(element, StopMarker):
                self.new_node("stop", pending)
                pending = []
            elif isinstance(element, Activity):
                previous_activity = self.new_node(
                    "activity", pending, element.label
                )
                pending = [(previous_activity, None)]
            elif isinstance(element, Note):
                self.note(element, previous_activity)
            elif isinstance(element, IfBlock):
                pending = self.if_block(element, pending)
            elif isinstance(element, ForkBlock):
                pending = self.fork_block(element, pending)
            elif isinstance(element, RepeatBlock):
                pending = self.repeat_block(element, pending)
            else:
                raise TypeError(f"Not a diagram element: {element!r}")

            if not isinstance(element, (Activity, Note)):
                previous_activity = None
        return pending

    def note(self, note, activity_id):
        if activity_id is None:
            raise ModelError(f"note '{note.text}' does not follow an activity")
        text = note.text
        if text.lower().startswith(ARTIFACT_NOTE_PREFIX):
            name = text[len(ARTIFACT_NOTE_PREFIX) :].strip()
            if name:
                self.artifacts.append(Artifact(name, activity_id))

    def if_block(self, block, pending):
        decision = self.new_node("decision", pending, block.condition)
        then_guard = block.then_label or DEFAULT_TRUE_GUARD
        else_guard = block.else_label or DEFAULT_FALSE_GUARD
        if then_guard.strip().lower() == else_guard.strip().lower():
            raise ModelError(
                f"decision '{block.condition}' has two branches guarded "
                f"'{then_guard}'"
            )

        exits = self.body(block.then_body, [(decision, then_guard)])
        if block.else_body is not None:
            exits += self.body(block.else_body, [(decision, else_guard)])
        else:
            exits.append((decision, else_guard))

        if not exits:
            return []
        return [(self.new_node("merge", exits), None)]

    def fork_block(self, block, pending):
        fork = self.new_node("fork", pending)
        exits = []
        for index, branch in enumerate(block.branches):
            branch_exits = self.body(branch, [(fork, None)])
            if not branch_exits:
                raise ModelError(
                    f"branch {index} of a fork ends without rejoining; fork "
                    "branches must reach 'end fork'"
                )
            exits += branch_exits
        return [(self.new_node("join", exits), None)]

    def repeat_block(self, block, pending):
        first_index = len(self.nodes)
        exits = self.body(block.body, pending)
        if len(self.nodes) == first_index:
            raise ModelError(
                f"repeat '{block.while_condition}' has no node in its body"
            )
        if not exits:
            raise ModelError(
                f"repeat '{block.while_condition}' body never reaches its "
                "loop condition"
            )
        head = self.nodes[first_index].id
        decision = self.new_node("decision", exits, block.while_condition)
        loop_label = block.loop_label or None
        self.edges.append(
            Edge(decision, head, loop_label or DEFAULT_TRUE_GUARD)
        )
        return [(decision, _opposite_guard(loop_label))]


def lower_to_model(ast):
    """Lower a diagram syntax tree to the canonical process model.

    Sequential elements become chained edges, if-blocks a decision with
    guarded out-edges joining at a merge node, forks a fork node, branch
    subgraphs and a join node, repeat-blocks the body followed by a
    decision whose loop-guard edge returns to the body head. Notes of the
    form "produces: X" attach an artifact to the preceding activity.

    Parameters
    ----------
    ast : DiagramAst

    Returns
    -------
    ProcessModel

    Raises
    ------
    ModelError
        If the diagram has no start, control falls off the end without
        stop, or a node would be unreachable.
    """
    lowering = _Lowering()
    pending = lowering.body(ast.elements, [])

    if not any(n.kind == "start" for n in lowering.nodes):
        raise ModelError("diagram has no start")
    if pending:
        dangling = ", ".join(sorted({source for source, _ in pending}))
        raise ModelError(
            f"control falls off the end of the diagram without stop "
            f"(after {dangling})"
        )

    model = ProcessModel(
        participants=tuple(lowering.participants),
        nodes=tuple(lowering.nodes),
        edges=tuple(lowering.edges),
        artifacts=tuple(lowering.artifacts),
    )
    validate_model(model)
    logger.debug(
        f"Lowered {ast.source_name}: {len(model.nodes)} nodes, "
        f"{len(model.edges)} edges, {len(model.artifacts)} artifacts"
    )
    return model


# ------------------------------- #
#   VALIDATION                    #
# ------------------------------- #


def validate_model(model, error_cls=ModelError):
    """Check the structural invariants of a process model.

    Raises ``error_cls`` on the first violation, returns True otherwise.
    """
    ids = [node.id for node in model.nodes]
    seen = set()
    for node in model.nodes:
        if node.kind not in NODE_KINDS:
            raise error_cls(f"node {node.id} has unknown kind '{node.kind}'")
        if node.id in seen:
            raise error_cls(f"duplicate node id {node.id}")
        seen.add(node.id)
        if node.lane is not None and node.lane not in model.participants:
            raise error_cls(
                f"node {node.id} is in lane '{node.lane}' which is not a "
                "participant"
            )

    for edge in model.edges:
        for end in (edge.source, edge.target):
            if end not in seen:
                raise error_cls(
                    f"edge {edge.source}->{edge.target} references unknown "
                    f"node {end}"
                )
    for artifact in model.artifacts:
        if artifact.produced_by not in seen:
            raise error_cls(
                f"artifact '{artifact.name}' produced by unknown node "
                f"{artifact.produced_by}"
            )

    starts = [n.id for n in model.nodes if n.kind == "start"]
    if len(starts) != 1:
        raise error_cls(f"expected exactly one start node, found {starts}")
    if not any(n.kind == "stop" for n in model.nodes):
        raise error_cls("model has no stop node")

    for node in model.nodes:
        out = model.out_edges(node.id)
        if node.kind == "decision":
            guards = [e.guard for e in out]
            if len(out) != 2 or any(not g for g in guards):
                raise error_cls(
                    f"decision {node.id} needs exactly 2 guarded out-edges"
                )
            if guards[0].strip().lower() == guards[1].strip().lower():
                raise error_cls(
                    f"decision {node.id} has duplicate guard '{guards[0]}'"
                )
        elif any(e.guard is not None for e in out):
            raise error_cls(f"{node.kind} node {node.id} has a guarded edge")
        if node.kind == "fork" and len(out) < 2:
            raise error_cls(f"fork {node.id} needs at least 2 out-edges")

    graph = nx.MultiDiGraph()
    graph.add_nodes_from(ids)
    graph.add_edges_from((e.source, e.target) for e in model.edges)
    unreachable = set(ids) - nx.descendants(graph, starts[0]) - {starts[0]}
    if unreachable:
        raise error_cls(
            f"unreachable nodes: {', '.join(sorted(unreachable))}"
        )

    joins = matching_joins(model, graph)
    for fork, join in joins.items():
        if join is None or model.node(join).kind != "join":
            raise error_cls(f"fork {fork} has no matching join")
    return True


def matching_joins(model, graph=None):
    """Map each fork node id to its matching join: the immediate
    post-dominator of the fork (None if it has none).
    """
    forks = [n.id for n in model.nodes if n.kind == "fork"]
    if not forks:
        return {}
    if graph is None:
        graph = nx.DiGraph()
        graph.add_nodes_from(n.id for n in model.nodes)
        graph.add_edges_from((e.source, e.target) for e in model.edges)

    closed = nx.DiGraph(graph)
    closed.add_node(_VIRTUAL_EXIT)
    for node in list(graph.nodes):
        if graph.out_degree(node) == 0:
            closed.add_edge(node, _VIRTUAL_EXIT)
    post_dominators = nx.immediate_dominators(closed.reverse(), _VIRTUAL_EXIT)

    joins = {}
    for fork in forks:
        join = post_dominators.get(fork)
        joins[fork] = None if join in (None, _VIRTUAL_EXIT) else join
    return joins


# ------------------------------- #
#   CANONICAL JSON                #
# ------------------------------- #


def model_to_dict(model):
    return {
        "participants": list(model.participants),
        "nodes": [
            {"id": n.id, "kind": n.kind, "label": n.label, "lane": n.lane}
            for n in model.nodes
        ],
        "edges": [
            {"from": e.source, "to": e.target, "guard": e.guard}
            for e in model.edges
        ],
        "artifacts": [
            {"name": a.name, "produced_by": a.produced_by}
            for a in model.artifacts
        ],
    }


def to_canonical_json(model):
    """Bit-deterministic JSON bytes of a process model.

    Keys appear in the fixed order participants, nodes, edges, artifacts,
    record fields in declared order.
    """
    return canonical_dumps(model_to_dict(model))


def from_canonical_json(data):
    """Read a process model from its JSON document.

    Parameters
    ----------
    data : bytes or str

    Returns
    -------
    ProcessModel

    Raises
    ------
    SchemaError
        On malformed JSON, missing or extra keys, unknown kinds, duplicate
        ids, dangling edges or any other broken model invariant.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        document = json.loads(data)
    except json.JSONDecodeError as e:
        raise SchemaError(f"not a JSON document: {e}") from e

    model = ProcessModel(
        participants=tuple(
            _field_list(document, descriptors.MODEL_KEYS, "participants")
        ),
        nodes=tuple(
            Node(
                id=_text(r["id"], "node id"),
                kind=_text(r["kind"], "node kind"),
                label=_text(r["label"], "node label"),
                lane=_optional_text(r["lane"], "node lane"),
            )
            for r in _records(document, "nodes", descriptors.NODE_KEYS)
        ),
        edges=tuple(
            Edge(
                source=_text(r["from"], "edge from"),
                target=_text(r["to"], "edge to"),
                guard=_optional_text(r["guard"], "edge guard"),
            )
            for r in _records(document, "edges", descriptors.EDGE_KEYS)
        ),
        artifacts=tuple(
            Artifact(
                name=_text(r["name"], "artifact name"),
                produced_by=_text(r["produced_by"], "artifact producer"),
            )
            for r in _records(
                document, "artifacts", descriptors.ARTIFACT_KEYS
            )
        ),
    )
    for participant in model.participants:
        _text(participant, "participant")
    validate_model(model, error_cls=SchemaError)
    return model


def _field_list(document, keys, name):
    if not isinstance(document, dict) or tuple(document.keys()) != keys:
        raise SchemaError(f"document keys must be {list(keys)}")
    value = document[name]
    if not isinstance(value, list):
        raise SchemaError(f"'{name}' must be an array")
    return value


def _records(document, name, keys):
    records = _field_list(document, descriptors.MODEL_KEYS, name)
    for record in records:
        if not isinstance(record, dict) or tuple(record.keys()) != keys:
            raise SchemaError(f"each entry of '{name}' must have {list(keys)}")
    return records


def _text(value, what):
    if not isinstance(value, str):
        raise SchemaError(f"{what} must be a string, not {value!r}")
    return value


def _optional_text(value, what):
    return None if value is None else _text(value, what)
