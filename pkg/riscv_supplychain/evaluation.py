"""Scoring of extracted graphs, process models, rules and queries
against ground truth.

Every aspect is scored recall-style: the number of ground-truth items
found in the extraction, out of the ground-truth total. Extracted items
absent from the truth are counted as ``surplus`` but never scored.
"""

from dataclasses import asdict, dataclass, field

from loguru import logger

from riscv_supplychain import descriptors
from riscv_supplychain.descriptors import (
    EVALUATION_QUERIES_FILENAME,
    NAME_PROPERTY,
    PROCESS_TRUTH_RULES_FILENAME,
    REFERENCE_DIAGRAM_FILENAME,
    REFERENCE_GRAPH_FILENAME,
    SUMMARY_ROW_ORDER,
    SUMMARY_ROW_TITLES,
)
from riscv_supplychain.diagram import parse_activity_diagram
from riscv_supplychain.exceptions import (
    EvaluationError,
    QueryParseError,
    QueryResourceError,
)
from riscv_supplychain.kg.query import brute_force_match, execute, parse_query
from riscv_supplychain.kg.script import ingest_script
from riscv_supplychain.process_model import lower_to_model
from riscv_supplychain.rules import parse_rules
from riscv_supplychain.utils import (
    canonical_dumps,
    fixture_path,
    normalize_label,
    read_fixture,
    read_json,
    render_table,
)


def percent(matched, total):
    """Integer percentage of ``matched`` out of ``total``, rounded half
    up.

    Examples
    --------
    >>> percent(22, 25)
    88
    >>> percent(5, 8)
    63
    """
    if total <= 0:
        raise EvaluationError(f"cannot score against a total of {total}")
    return (200 * matched + total) // (2 * total)


@dataclass(frozen=True)
class MatchReport:
    """Score of one aspect.

    Parameters
    ----------
    aspect : str
        One of ``descriptors.SUMMARY_ROW_ORDER``.
    matched : int
    total : int
    percent : int
    surplus : int
        Extracted items with no ground-truth counterpart.
    """

    aspect: str
    matched: int
    total: int
    percent: int
    surplus: int = 0

    def __post_init__(self):
        if not 0 <= self.matched <= self.total:
            raise EvaluationError(
                f"{self.aspect}: matched {self.matched} is outside "
                f"0..{self.total}"
            )

    @classmethod
    def of(cls, aspect, extracted, truth):
        """Report comparing two sets of matching keys."""
        extracted, truth = set(extracted), set(truth)
        matched = len(extracted & truth)
        return cls(
            aspect,
            matched,
            len(truth),
            percent(matched, len(truth)),
            surplus=len(extracted - truth),
        )

    @property
    def cell(self):
        return f"{self.matched} ({self.percent}%)"

    def to_dict(self):
        return asdict(self)


# ------------------------------- #
#   GROUND TRUTH                  #
# ------------------------------- #


def _node_name(node):
    return normalize_label(node.props.get(NAME_PROPERTY, node.id))


def concept_keys(graph):
    return {_node_name(node) for node in graph.nodes.values()}


def relationship_keys(graph):
    return {
        (
            _node_name(graph.nodes[rel.source]),
            normalize_label(rel.type),
            _node_name(graph.nodes[rel.target]),
        )
        for rel in graph.rels
    }


def attribute_keys(graph):
    return {
        (_node_name(node), normalize_label(key))
        for node in graph.nodes.values()
        for key in node.props
        if key != NAME_PROPERTY
    }


def handoffs(model):
    """Lane-to-lane handoffs of a process model.

    A handoff links two activity or decision nodes that follow each other
    through structural nodes only and sit in different lanes.

    Returns
    -------
    set of (str, str)
        Normalized (from lane, to lane) pairs.
    """
    successors = {}
    for edge in model.edges:
        successors.setdefault(edge.source, []).append(edge.target)

    pairs = set()
    for node in model.labelled_nodes():
        if node.lane is None:
            continue
        seen = set()
        frontier = list(successors.get(node.id, []))
        while frontier:
            current = model.node(frontier.pop())
            if current.id in seen:
                continue
            seen.add(current.id)
            if current.kind in descriptors.LABELLED_KINDS:
                if current.lane is not None and current.lane != node.lane:
                    pairs.add(
                        (
                            normalize_label(node.lane),
                            normalize_label(current.lane),
                        )
                    )
            else:
                frontier.extend(successors.get(current.id, []))
    return pairs


def process_keys(model):
    return {
        "participants": {normalize_label(p) for p in model.participants},
        "activities": {
            normalize_label(n.label) for n in model.labelled_nodes()
        },
        "process_relationships": handoffs(model),
        "artifacts": {normalize_label(a.name) for a in model.artifacts},
    }


@dataclass(frozen=True)
class GroundTruth:
    """Matching keys of the reference graph and process.

    ``graph`` holds the concepts, kg_relationships and attributes key
    sets; ``process`` holds participants, activities,
    process_relationships, artifacts and rules. Either may be empty when
    only one side is evaluated.
    """

    graph: dict = field(default_factory=dict)
    process: dict = field(default_factory=dict)

    @classmethod
    def from_artifacts(cls, graph=None, model=None, rules=()):
        graph_keys = {}
        if graph is not None:
            graph_keys = {
                "concepts": concept_keys(graph),
                "kg_relationships": relationship_keys(graph),
                "attributes": attribute_keys(graph),
            }
        process = {}
        if model is not None:
            process = process_keys(model)
            process["rules"] = {rule.normalized_body() for rule in rules}
        return cls(graph_keys, process)

    @classmethod
    def from_fixtures(cls):
        """Ground truth of the bundled RISC-V reference fixtures."""
        graph = ingest_script(
            read_fixture(REFERENCE_GRAPH_FILENAME),
            source_name=REFERENCE_GRAPH_FILENAME,
        )
        model = lower_to_model(
            parse_activity_diagram(
                read_fixture(REFERENCE_DIAGRAM_FILENAME),
                source_name=REFERENCE_DIAGRAM_FILENAME,
            )
        )
        rules = parse_rules(
            read_fixture(PROCESS_TRUTH_RULES_FILENAME),
            source_name=PROCESS_TRUTH_RULES_FILENAME,
        )
        return cls.from_artifacts(graph, model, rules)

    def counts(self):
        """Ground-truth total per aspect."""
        keys = {**self.graph, **self.process}
        return {aspect: len(items) for aspect, items in keys.items()}


# ------------------------------- #
#   MATCHING                      #
# ------------------------------- #


def match_graph(extracted, truth):
    """Score an extracted property graph.

    Returns
    -------
    list of MatchReport
        concepts, kg_relationships and attributes.
    """
    extracted_keys = {
        "concepts": concept_keys(extracted),
        "kg_relationships": relationship_keys(extracted),
        "attributes": attribute_keys(extracted),
    }
    return [
        MatchReport.of(aspect, extracted_keys[aspect], truth.graph[aspect])
        for aspect in ("concepts", "kg_relationships", "attributes")
    ]


def match_process(extracted, truth, extracted_rules=None):
    """Score an extracted process model, and its rules when given.

    Parameters
    ----------
    extracted : ProcessModel
    truth : GroundTruth
    extracted_rules : list of Rule, optional
        Scored against the truth rules by normalized body. Absent rules
        score as an empty extraction.

    Returns
    -------
    list of MatchReport
        participants, activities, process_relationships, artifacts and
        rules.
    """
    keys = process_keys(extracted)
    keys["rules"] = {rule.normalized_body() for rule in extracted_rules or ()}
    aspects = (
        "participants",
        "activities",
        "process_relationships",
        "artifacts",
        "rules",
    )
    return [
        MatchReport.of(aspect, keys[aspect], truth.process[aspect])
        for aspect in aspects
    ]


# ------------------------------- #
#   QUERIES                       #
# ------------------------------- #


@dataclass(frozen=True)
class QueryCase:
    id: str
    question: str
    reference: str
    generated: str


def load_query_cases(path=None):
    """Evaluation queries from a JSON list of objects with id, question,
    reference and generated fields. Defaults to the bundled set."""
    path = path or fixture_path(EVALUATION_QUERIES_FILENAME)
    return [
        QueryCase(
            id=str(entry["id"]),
            question=entry.get("question", ""),
            reference=entry["reference"],
            generated=entry["generated"],
        )
        for entry in read_json(path)
    ]


def query_pairs(cases, graph):
    """(candidate, oracle) result tables of each evaluation query.

    The candidate is the generated query run by the matcher; it is None
    when the generated query does not parse or exceeds the binding
    guard. The oracle is the reference query run by brute force.
    """
    pairs = []
    for case in cases:
        oracle = brute_force_match(
            parse_query(case.reference, source_name=f"{case.id}/reference"),
            graph,
        )
        try:
            candidate = execute(
                parse_query(case.generated, source_name=case.id), graph
            )
        except (QueryParseError, QueryResourceError) as error:
            logger.info(f"query {case.id} fails: {error}")
            candidate = None
        pairs.append((candidate, oracle))
    return pairs


def score_queries(pairs):
    """Count the generated queries whose result equals the oracle table.

    Parameters
    ----------
    pairs : list of (ResultTable or None, ResultTable)

    Returns
    -------
    MatchReport
        Zero of zero when there are no queries.
    """
    if not pairs:
        return MatchReport("queries", 0, 0, 0)
    matched = sum(
        1
        for candidate, oracle in pairs
        if candidate is not None and candidate == oracle
    )
    return MatchReport(
        "queries", matched, len(pairs), percent(matched, len(pairs))
    )


# ------------------------------- #
#   SUMMARY                       #
# ------------------------------- #


def summarize(reports):
    """Results table in the fixed aspect order, one "N (P%)" cell per
    aspect. The artifacts row, when present, comes last.

    Returns
    -------
    str
    """
    by_aspect = {report.aspect: report for report in reports}
    rows = [
        (
            SUMMARY_ROW_TITLES[aspect],
            by_aspect[aspect].total,
            by_aspect[aspect].cell,
        )
        for aspect in SUMMARY_ROW_ORDER
        if aspect in by_aspect
    ]
    return render_table(["Aspect", "Ground Truth", "Extracted"], rows)


def reports_to_json(reports):
    order = {aspect: i for i, aspect in enumerate(SUMMARY_ROW_ORDER)}
    ordered = sorted(reports, key=lambda r: order.get(r.aspect, len(order)))
    return canonical_dumps([report.to_dict() for report in ordered])
