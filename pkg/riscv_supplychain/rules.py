"""Validation rules over process models.

Rule files hold one rule per line::

    # comment
    rule 1 "ISA first" : before("Define ISA Specification","Run EDA")
    rule 10 : role("IP Designers","Develop CPU Core IP")

Seven forms are understood: before, after, after_true, after_false,
not_before, role and parallel. Labels are matched against activity and
decision nodes after normalization (see ``utils.normalize_label``).
"""

import re
from dataclasses import dataclass, field

from loguru import logger

from riscv_supplychain.cfg import (
    build_cfg,
    enumerate_paths,
    fork_branch_membership,
    reachable_without,
    shortest_path_without,
)
from riscv_supplychain.descriptors import RULE_FORMS
from riscv_supplychain.exceptions import RuleParseError
from riscv_supplychain.process_model import is_false_guard, is_true_guard
from riscv_supplychain.utils import (
    canonical_dumps,
    locate,
    natural_key,
    normalize_label,
)

SATISFIED = "satisfied"
VIOLATED = "violated"
INAPPLICABLE = "inapplicable"
INCONCLUSIVE = "inconclusive"
STATUSES = (SATISFIED, VIOLATED, INAPPLICABLE, INCONCLUSIVE)


# ------------------------------- #
#   RULE TYPES                    #
# ------------------------------- #


@dataclass(frozen=True)
class Before:
    a: str
    b: str
    form = "before"


@dataclass(frozen=True)
class After:
    a: str
    b: str
    form = "after"


@dataclass(frozen=True)
class AfterTrue:
    a: str
    d: str
    form = "after_true"


@dataclass(frozen=True)
class AfterFalse:
    a: str
    d: str
    form = "after_false"


@dataclass(frozen=True)
class NotBefore:
    a: str
    b: str
    form = "not_before"


@dataclass(frozen=True)
class Role:
    role: str
    a: str
    form = "role"


@dataclass(frozen=True)
class Parallel:
    a: str
    b: str
    form = "parallel"


_BODIES = (Before, After, AfterTrue, AfterFalse, NotBefore, Role, Parallel)
BODY_CLASSES = {cls.form: cls for cls in _BODIES}

# Forms whose two labels must differ.
_DISTINCT_ARGS = ("before", "after", "not_before", "parallel")


@dataclass(frozen=True)
class Rule:
    id: str
    description: str
    body: object

    @property
    def form(self):
        return self.body.form

    @property
    def args(self):
        return tuple(
            getattr(self.body, name)
            for name in self.body.__dataclass_fields__
        )

    def normalized_body(self):
        """Form and normalized arguments, used to compare rules."""
        return (self.form,) + tuple(normalize_label(a) for a in self.args)

    def to_dict(self):
        return {
            "id": self.id,
            "description": self.description,
            "form": self.form,
            "args": list(self.args),
        }


@dataclass(frozen=True)
class Verdict:
    """Outcome of one rule.

    Parameters
    ----------
    rule_id : str
    status : str
        One of satisfied, violated, inapplicable, inconclusive.
    evidence : dict
        JSON-compatible. Violations carry a replayable ``path`` (node ids
        along model edges) or the offending ``nodes``; inapplicable
        verdicts name the ``unresolved`` labels.
    rule : Rule
        The evaluated rule; not part of the verdict's identity.
    """

    rule_id: str
    status: str
    evidence: dict = field(default_factory=dict)
    rule: Rule | None = field(default=None, compare=False, repr=False)

    def to_dict(self):
        return {
            "rule_id": self.rule_id,
            "status": self.status,
            "evidence": self.evidence,
        }


# ------------------------------- #
#   PARSING                       #
# ------------------------------- #

_QUOTED = r'"(?:[^"\\\n]|\\.)*"'
_RULE_LINE = re.compile(
    r"^\s*rule\s+(?P<id>[A-Za-z0-9_.\-]+)\s*"
    rf"(?P<desc>{_QUOTED})?\s*"
    r":\s*(?P<form>[A-Za-z_]\w*)\s*"
    rf'\((?P<args>(?:{_QUOTED}|[^"#()])*)\)\s*(?:#.*)?$'
)
_ARGS = re.compile(
    rf"^\s*(?P<first>{_QUOTED})\s*,\s*(?P<second>{_QUOTED})\s*$"
)


def _unquote(token):
    return re.sub(r"\\(.)", r"\1", token[1:-1])


def parse_rules(text, source_name="<string>"):
    """Parse a rule file.

    Parameters
    ----------
    text : str
    source_name : str
        Used in error locations.

    Returns
    -------
    list of Rule
        In file order.
    """
    rules = []
    seen = {}

    def error(number, column, message):
        return locate(
            text, number, column, message, RuleParseError, source_name
        )

    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        match = _RULE_LINE.match(line)
        if match is None:
            column = len(line) - len(line.lstrip()) + 1
            if not stripped.startswith("rule"):
                raise error(number, column, "expected 'rule <id> : <form>'")
            raise error(
                number,
                column,
                "malformed rule; expected "
                "'rule <id> [\"<description>\"] : <form>(\"A\",\"B\")'",
            )

        rule_id = match["id"]
        form = match["form"]
        if form not in BODY_CLASSES:
            raise error(
                number,
                match.start("form") + 1,
                f"unknown rule form '{form}'; expected one of "
                f"{', '.join(RULE_FORMS)}",
            )
        args = _ARGS.match(match["args"])
        if args is None:
            raise error(
                number,
                match.start("args") + 1,
                f'{form} takes two quoted arguments, e.g. {form}("A","B")',
            )
        first, second = _unquote(args["first"]), _unquote(args["second"])
        if not first.strip() or not second.strip():
            raise error(
                number, match.start("args") + 1, "labels must not be empty"
            )
        if form in _DISTINCT_ARGS and normalize_label(
            first
        ) == normalize_label(second):
            raise error(
                number,
                match.start("args") + 1,
                f"{form} rule references the same activity twice",
            )
        if rule_id in seen:
            raise error(
                number,
                match.start("id") + 1,
                f"duplicate rule id '{rule_id}' (first defined on line "
                f"{seen[rule_id]})",
            )
        seen[rule_id] = number

        description = _unquote(match["desc"]) if match["desc"] else ""
        rules.append(
            Rule(
                id=rule_id,
                description=description,
                body=BODY_CLASSES[form](first.strip(), second.strip()),
            )
        )

    logger.debug(f"Parsed {len(rules)} rules from {source_name}")
    return rules


def _quote(text):
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_rule(rule):
    """Rule DSL line of a rule."""
    head = f"rule {rule.id}"
    if rule.description:
        head += f" {_quote(rule.description)}"
    args = ",".join(_quote(a) for a in rule.args)
    return f"{head} : {rule.form}({args})"


def format_rules(rules):
    return "".join(format_rule(rule) + "\n" for rule in rules)


# ------------------------------- #
#   EVALUATION                    #
# ------------------------------- #


def _sorted_ids(ids):
    return sorted(ids, key=natural_key)


def _unresolved(cfg, rule, labels):
    missing = [label for label in labels if not cfg.nodes_for(label)]
    if missing:
        logger.warning(
            f"rule {rule.id}: no activity or decision labelled "
            f"{', '.join(repr(m) for m in missing)}"
        )
        return Verdict(
            rule.id, INAPPLICABLE, {"unresolved": missing}, rule=rule
        )
    return None


def _branch_targets(cfg, decision, truthy):
    """(taken, other) targets of a decision for the true (or false)
    branch, or None if the decision has no such guard.
    """
    wanted = is_true_guard if truthy else is_false_guard
    edges = cfg.guarded_targets(decision)
    for index, (guard, target) in enumerate(edges):
        if wanted(guard) and len(edges) == 2:
            return target, edges[1 - index][1]
    return None


def _safe_reach(cfg, blocked, source):
    if source in blocked:
        return set()
    return reachable_without(cfg, blocked, source)


def _check_precedence(cfg, rule, first, then):
    """``first`` must occur before every occurrence of ``then``."""
    unresolved = _unresolved(cfg, rule, (first, then))
    if unresolved:
        return unresolved
    blocked = cfg.nodes_for(first)
    reached = reachable_without(cfg, blocked, cfg.start)
    offending = _sorted_ids(cfg.nodes_for(then) & reached)
    if not offending:
        return Verdict(rule.id, SATISFIED, {}, rule=rule)
    path = shortest_path_without(cfg, blocked, cfg.start, offending[0])
    return Verdict(rule.id, VIOLATED, {"path": path}, rule=rule)


def _check_branch(cfg, rule, truthy):
    body = rule.body
    unresolved = _unresolved(cfg, rule, (body.a, body.d))
    if unresolved:
        return unresolved
    decisions = [
        d for d in _sorted_ids(cfg.nodes_for(body.d))
        if cfg.kind(d) == "decision"
    ]
    branches = [(d, _branch_targets(cfg, d, truthy)) for d in decisions]
    branches = [(d, targets) for d, targets in branches if targets]
    if not branches:
        return Verdict(
            rule.id,
            INAPPLICABLE,
            {"unguarded_decision": body.d},
            rule=rule,
        )

    gate = cfg.nodes_for(body.d)
    targets = cfg.nodes_for(body.a)
    for decision, (taken, other) in branches:
        if not targets & _safe_reach(cfg, gate, taken):
            return Verdict(
                rule.id,
                VIOLATED,
                {"side": "obligation", "path": [decision, taken]},
                rule=rule,
            )
        forbidden = _sorted_ids(targets & _safe_reach(cfg, gate, other))
        if forbidden:
            tail = shortest_path_without(cfg, gate, other, forbidden[0])
            return Verdict(
                rule.id,
                VIOLATED,
                {"side": "prohibition", "path": [decision] + tail},
                rule=rule,
            )
    decision, (taken, _) = branches[0]
    return Verdict(
        rule.id, SATISFIED, {"branch_edge": [decision, taken]}, rule=rule
    )


def _check_role(cfg, rule):
    body = rule.body
    unresolved = _unresolved(cfg, rule, (body.a,))
    if unresolved:
        return unresolved
    wanted = normalize_label(body.role)
    offending = [
        {"node": node, "lane": cfg.lane(node)}
        for node in _sorted_ids(cfg.nodes_for(body.a))
        if cfg.lane(node) is None or normalize_label(cfg.lane(node)) != wanted
    ]
    if offending:
        return Verdict(rule.id, VIOLATED, {"nodes": offending}, rule=rule)
    return Verdict(rule.id, SATISFIED, {}, rule=rule)


def _check_parallel(cfg, rule, membership=None):
    body = rule.body
    unresolved = _unresolved(cfg, rule, (body.a, body.b))
    if unresolved:
        return unresolved
    if membership is None:
        membership = fork_branch_membership(cfg)
    witnesses = set()
    for a_node in cfg.nodes_for(body.a):
        a_fork, a_index = membership.get(a_node, (None, None))
        for b_node in cfg.nodes_for(body.b):
            b_fork, b_index = membership.get(b_node, (None, None))
            if a_fork is not None and a_fork == b_fork and a_index != b_index:
                witnesses.add(a_fork)
    if witnesses:
        fork = _sorted_ids(witnesses)[0]
        return Verdict(rule.id, SATISFIED, {"fork": fork}, rule=rule)
    return Verdict(
        rule.id,
        VIOLATED,
        {
            "nodes": _sorted_ids(
                cfg.nodes_for(body.a) | cfg.nodes_for(body.b)
            ),
            "reason": "no fork separates the two activities",
        },
        rule=rule,
    )


def evaluate_rule(rule, cfg, membership=None):
    """Verdict of one rule over a control-flow graph."""
    body = rule.body
    if isinstance(body, Before):
        return _check_precedence(cfg, rule, body.a, body.b)
    if isinstance(body, (After, NotBefore)):
        return _check_precedence(cfg, rule, body.b, body.a)
    if isinstance(body, AfterTrue):
        return _check_branch(cfg, rule, truthy=True)
    if isinstance(body, AfterFalse):
        return _check_branch(cfg, rule, truthy=False)
    if isinstance(body, Role):
        return _check_role(cfg, rule)
    return _check_parallel(cfg, rule, membership)


def _by_rule_id(verdicts):
    return sorted(verdicts, key=lambda v: natural_key(v.rule_id))


def evaluate(rules, model):
    """Evaluate rules against a process model.

    Parameters
    ----------
    rules : list of Rule
    model : ProcessModel
        A valid model.

    Returns
    -------
    list of Verdict
        One per rule, ordered by rule id.
    """
    cfg = build_cfg(model)
    membership = fork_branch_membership(cfg)
    verdicts = [evaluate_rule(rule, cfg, membership) for rule in rules]
    for verdict in verdicts:
        logger.debug(f"rule {verdict.rule_id}: {verdict.status}")
    return _by_rule_id(verdicts)


# ------------------------------- #
#   PATH ORACLE                   #
# ------------------------------- #


def _precedence_on_paths(cfg, rule, paths, first, then):
    first_nodes = cfg.nodes_for(first)
    then_nodes = cfg.nodes_for(then)
    for path in paths:
        for position, node in enumerate(path):
            if node in first_nodes:
                break
            if node in then_nodes:
                return Verdict(
                    rule.id,
                    VIOLATED,
                    {"path": list(path[: position + 1])},
                    rule=rule,
                )
    return Verdict(rule.id, SATISFIED, {}, rule=rule)


def _gated_occurrence(path, start, gate, targets):
    """Index of the first target occurrence at or after ``start`` before
    the next gate occurrence, or None."""
    for position in range(start, len(path)):
        if path[position] in gate:
            return None
        if path[position] in targets:
            return position
    return None


def _branch_on_paths(cfg, rule, paths, truthy):
    body = rule.body
    gate = cfg.nodes_for(body.d)
    targets = cfg.nodes_for(body.a)
    branches = {}
    for decision in gate:
        if cfg.kind(decision) == "decision":
            found = _branch_targets(cfg, decision, truthy)
            if found:
                branches[decision] = found
    if not branches:
        return Verdict(
            rule.id,
            INAPPLICABLE,
            {"unguarded_decision": body.d},
            rule=rule,
        )

    obligations = set()
    for path in paths:
        for position in range(len(path) - 1):
            decision = path[position]
            if decision not in branches:
                continue
            taken, other = branches[decision]
            successor = path[position + 1]
            hit = _gated_occurrence(path, position + 1, gate, targets)
            if successor == taken and hit is not None:
                obligations.add(decision)
            if successor == other and hit is not None:
                return Verdict(
                    rule.id,
                    VIOLATED,
                    {
                        "side": "prohibition",
                        "path": list(path[position : hit + 1]),
                    },
                    rule=rule,
                )
    for decision in _sorted_ids(branches):
        if decision not in obligations:
            return Verdict(
                rule.id,
                VIOLATED,
                {
                    "side": "obligation",
                    "path": [decision, branches[decision][0]],
                },
                rule=rule,
            )
    decision = _sorted_ids(branches)[0]
    return Verdict(
        rule.id,
        SATISFIED,
        {"branch_edge": [decision, branches[decision][0]]},
        rule=rule,
    )


def _evaluate_on_paths(cfg, rule, paths, membership):
    body = rule.body
    if isinstance(body, (Role, Parallel)):
        return evaluate_rule(rule, cfg, membership)
    if isinstance(body, Before):
        labels = (body.a, body.b)
    elif isinstance(body, (After, NotBefore)):
        labels = (body.b, body.a)
    else:
        labels = (body.a, body.d)
    unresolved = _unresolved(cfg, rule, labels)
    if unresolved:
        return unresolved
    if isinstance(body, (AfterTrue, AfterFalse)):
        return _branch_on_paths(
            cfg, rule, paths, truthy=isinstance(body, AfterTrue)
        )
    return _precedence_on_paths(cfg, rule, paths, *labels)


def evaluate_by_paths(rules, model, edge_budget=2):
    """Evaluate rules by literal occurrence checking over enumerated
    paths. Used as an independent oracle for ``evaluate``.

    A rule whose verdict changes when budget-truncated paths are
    dropped is reported ``inconclusive``.
    """
    if edge_budget < 2:
        raise ValueError(f"edge budget must be >= 2, not {edge_budget}")
    cfg = build_cfg(model)
    membership = fork_branch_membership(cfg)
    enumerated = enumerate_paths(cfg, edge_budget)
    every = [p.nodes for p in enumerated]
    complete = [p.nodes for p in enumerated if not p.truncated]
    truncated = len(every) - len(complete)
    if truncated:
        logger.info(
            f"{truncated} of {len(every)} paths hit the edge budget of "
            f"{edge_budget}"
        )

    verdicts = []
    for rule in rules:
        verdict = _evaluate_on_paths(cfg, rule, every, membership)
        if truncated:
            check = _evaluate_on_paths(cfg, rule, complete, membership)
            if check.status != verdict.status:
                verdict = Verdict(
                    rule.id,
                    INCONCLUSIVE,
                    {"truncated_paths": truncated},
                    rule=rule,
                )
        verdicts.append(verdict)
    return _by_rule_id(verdicts)


# ------------------------------- #
#   REPORTING                     #
# ------------------------------- #


def statement(rule):
    """Plain-language reading of a rule."""
    body = rule.body
    if isinstance(body, Before):
        return f'"{body.a}" must occur before "{body.b}"'
    if isinstance(body, After):
        return f'"{body.a}" must occur after "{body.b}"'
    if isinstance(body, NotBefore):
        return f'"{body.a}" must not occur before "{body.b}"'
    if isinstance(body, AfterTrue):
        return f'"{body.a}" must follow the true branch of "{body.d}"'
    if isinstance(body, AfterFalse):
        return f'"{body.a}" must follow the false branch of "{body.d}"'
    if isinstance(body, Role):
        return f'"{body.a}" must be performed by "{body.role}"'
    return f'"{body.a}" must run in parallel to "{body.b}"'


def _step(model, node_id):
    node = model.node(node_id)
    label = node.label or node.kind
    return f"{node.lane}:{label}" if node.lane else label


def _render_path(model, path):
    steps = [
        _step(model, node_id)
        for node_id in path
        if model.node(node_id).kind in ("activity", "decision")
    ]
    return " -> ".join(steps) if steps else "(no labelled steps)"


def _render_evidence(verdict, model):
    evidence = verdict.evidence
    lines = []
    if "unresolved" in evidence:
        names = ", ".join(f'"{u}"' for u in evidence["unresolved"])
        lines.append(f"unresolved labels: {names}")
    if "unguarded_decision" in evidence:
        lines.append(
            f'decision "{evidence["unguarded_decision"]}" has no such branch'
        )
    if "side" in evidence:
        lines.append(f"failed {evidence['side']}")
    if "path" in evidence:
        lines.append(f"path: {_render_path(model, evidence['path'])}")
    if "branch_edge" in evidence:
        lines.append(
            f"branch: {_render_path(model, evidence['branch_edge'])}"
        )
    if "fork" in evidence:
        lines.append(f"fork: {evidence['fork']}")
    if "nodes" in evidence:
        nodes = evidence["nodes"]
        ids = [n["node"] if isinstance(n, dict) else n for n in nodes]
        lines.append(f"nodes: {', '.join(_step(model, i) for i in ids)}")
    if "reason" in evidence:
        lines.append(evidence["reason"])
    if "truncated_paths" in evidence:
        lines.append(
            f"{evidence['truncated_paths']} paths truncated by the edge "
            "budget"
        )
    return lines


def explain(verdicts, model):
    """Human-readable report, one block per rule in rule id order."""
    if not verdicts:
        return "0 rules evaluated\n"

    blocks = []
    for verdict in _by_rule_id(verdicts):
        rule = verdict.rule
        title = f"rule {verdict.rule_id}"
        if rule is not None and rule.description:
            title += f' "{rule.description}"'
        lines = [f"{title}: {verdict.status}"]
        if rule is not None:
            lines.append(f"  {statement(rule)}")
        lines.extend(
            f"  {line}" for line in _render_evidence(verdict, model)
        )
        blocks.append("\n".join(lines))

    counts = {status: 0 for status in STATUSES}
    for verdict in verdicts:
        counts[verdict.status] += 1
    summary = (
        f"{counts[SATISFIED]} satisfied, {counts[VIOLATED]} violated, "
        f"{counts[INAPPLICABLE]} inapplicable"
    )
    if counts[INCONCLUSIVE]:
        summary += f", {counts[INCONCLUSIVE]} inconclusive"
    return "\n\n".join(blocks) + "\n\n" + summary + "\n"


def verdicts_to_json(verdicts):
    """Canonical JSON array of verdicts."""
    return canonical_dumps([v.to_dict() for v in _by_rule_id(verdicts)])
