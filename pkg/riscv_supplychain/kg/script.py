"""Graph-script ingestion and export.

The accepted subset covers what is needed to write a supply-chain graph
down as text::

    CREATE (tsmc:Company:Foundry {name: "TSMC", region: "Taiwan"})
    CREATE (arm:Company {name: "SiFive"});
    CREATE (arm)-[:SUPPLIES {item: "CPU Core IP"}]->(tsmc)
    MERGE (x:Standard {name: "RISC-V ISA"})

Aliases are visible to the whole script. MERGE binds to an existing
node (or relationship) with equal labels and properties instead of
creating a new one.
"""

import json
import re
from dataclasses import dataclass

from lark import Lark, Transformer, v_args
from lark.exceptions import (
    UnexpectedCharacters,
    UnexpectedEOF,
    UnexpectedInput,
)
from loguru import logger

from riscv_supplychain.exceptions import ScriptParseError
from riscv_supplychain.kg.graph import PropertyGraph
from riscv_supplychain.utils import locate

SCRIPT_GRAMMAR = r"""
start: ";"* (statement ";"*)*

statement: CREATE path ("," path)*

path: node_pattern (rel_pattern node_pattern)*

node_pattern: "(" [NAME] label* [props] ")"
label: ":" NAME

rel_pattern: "-" "[" [NAME] ":" NAME [props] "]" "->"   -> out_rel
           | "<-" "[" [NAME] ":" NAME [props] "]" "-"   -> in_rel

props: "{" [prop ("," prop)*] "}"
prop: NAME ":" value

value: STRING       -> string
     | NUMBER       -> number
     | TRUE         -> true
     | FALSE        -> false

CREATE: /create|merge/i
TRUE: /true/i
FALSE: /false/i
NAME: /[A-Za-z_][A-Za-z0-9_]*/ | /`[^`\n]+`/
STRING: /"(?:[^"\\\n]|\\.)*"/ | /'(?:[^'\\\n]|\\.)*'/
NUMBER: /-?\d+(\.\d+)?([eE][-+]?\d+)?/

COMMENT: /\/\/[^\n]*/
%import common.WS
%ignore WS
%ignore COMMENT
"""

# Friendly names of grammar terminals in error messages:
_TERMINAL_NAMES = {
    "CREATE": "CREATE or MERGE",
    "NAME": "a name",
    "STRING": "a string",
    "NUMBER": "a number",
    "TRUE": "true",
    "FALSE": "false",
    "$END": "end of input",
}


@dataclass
class _NodeRef:
    alias: str | None
    labels: tuple
    props: dict
    line: int
    column: int

    @property
    def is_bare(self):
        return not self.labels and not self.props


@dataclass
class _RelRef:
    alias: str | None
    type: str
    props: dict
    outgoing: bool


def _name(token):
    text = str(token)
    return text[1:-1] if text.startswith("`") else text


def unquote_string(token):
    """Value of a single- or double-quoted string literal."""
    return re.sub(r"\\(.)", r"\1", str(token)[1:-1])


def parse_number(text):
    text = str(text)
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    return float(text)


@v_args(meta=True)
class _ScriptTransformer(Transformer):
    def start(self, meta, children):
        return [c for c in children if c is not None]

    def statement(self, meta, children):
        keyword, *paths = children
        return (str(keyword).upper(), paths, meta.line)

    def path(self, meta, children):
        return children

    def node_pattern(self, meta, children):
        alias = _name(children[0]) if children[0] is not None else None
        labels = tuple(c for c in children[1:-1])
        props = children[-1] or {}
        return _NodeRef(alias, labels, props, meta.line, meta.column)

    def label(self, meta, children):
        return _name(children[0])

    def out_rel(self, meta, children):
        alias, rel_type, props = children
        return _RelRef(
            alias and _name(alias), _name(rel_type), props or {}, True
        )

    def in_rel(self, meta, children):
        alias, rel_type, props = children
        return _RelRef(
            alias and _name(alias), _name(rel_type), props or {}, False
        )

    def props(self, meta, children):
        return dict(c for c in children if c is not None)

    def prop(self, meta, children):
        return (_name(children[0]), children[1])

    def string(self, meta, children):
        return unquote_string(children[0])

    def number(self, meta, children):
        return parse_number(children[0])

    def true(self, meta, children):
        return True

    def false(self, meta, children):
        return False


_parser = Lark(SCRIPT_GRAMMAR, parser="lalr", propagate_positions=True)


def describe_expected(parser, names):
    """Readable list of terminals expected at a syntax error."""
    readable = set()
    for name in names:
        if name in _TERMINAL_NAMES:
            readable.add(_TERMINAL_NAMES[name])
            continue
        try:
            pattern = parser.get_terminal(name).pattern
        except KeyError:
            readable.add(name)
            continue
        readable.add(f"'{pattern.value}'")
    return ", ".join(sorted(readable))


def syntax_error(parser, text, error, error_cls, source_name):
    """Convert a lark syntax error into a located ParseError."""
    line, column = error.line, error.column
    at_end = isinstance(error, UnexpectedEOF) or (
        getattr(error, "token", None) is not None
        and error.token.type == "$END"
    )
    if at_end or line is None or line < 1:
        lines = text.splitlines() or [""]
        line, column = len(lines), len(lines[-1]) + 1
        message = "unexpected end of input"
    elif isinstance(error, UnexpectedCharacters):
        message = f"unexpected character {text[error.pos_in_stream]!r}"
    else:
        message = f"unexpected {str(error.token)!r}"
    expected = getattr(error, "expected", None) or getattr(
        error, "allowed", None
    )
    if expected:
        message += f"; expected {describe_expected(parser, expected)}"
    return locate(text, line, column, message, error_cls, source_name)


class _GraphBuilder:
    def __init__(self, text, source_name):
        self.text = text
        self.source_name = source_name
        self.graph = PropertyGraph()
        self.aliases = {}
        self.anonymous = 0

    def error(self, ref, message):
        return locate(
            self.text,
            ref.line,
            ref.column,
            message,
            ScriptParseError,
            self.source_name,
        )

    def new_id(self):
        self.anonymous += 1
        while f"_n{self.anonymous}" in self.graph.nodes:
            self.anonymous += 1
        return f"_n{self.anonymous}"

    def node(self, ref, merge, in_chain):
        """Resolve a node pattern to a node id, creating it if needed."""
        if ref.alias is not None and ref.alias in self.aliases:
            if not ref.is_bare:
                raise self.error(ref, f"duplicate alias '{ref.alias}'")
            return self.aliases[ref.alias]
        if ref.is_bare and in_chain:
            raise self.error(
                ref,
                f"unknown alias '{ref.alias}'"
                if ref.alias
                else "relationship endpoint needs an alias or a label",
            )
        if not ref.labels:
            raise self.error(ref, "node needs at least one label")

        existing = None
        if merge:
            existing = self.graph.find_node(ref.labels, ref.props)
        if existing is not None:
            node_id = existing.id
        else:
            node_id = ref.alias
            if node_id is None or node_id in self.graph.nodes:
                node_id = self.new_id()
            self.graph.add_node(node_id, ref.labels, ref.props)
        if ref.alias is not None:
            self.aliases[ref.alias] = node_id
        return node_id

    def statement(self, keyword, paths):
        merge = keyword == "MERGE"
        for path in paths:
            nodes, rels = path[0::2], path[1::2]
            in_chain = bool(rels)
            ids = [self.node(ref, merge, in_chain) for ref in nodes]
            for index, rel in enumerate(rels):
                source, target = ids[index], ids[index + 1]
                if not rel.outgoing:
                    source, target = target, source
                if merge and self.graph.find_relationship(
                    rel.type, source, target, rel.props
                ):
                    continue
                self.graph.add_relationship(
                    rel.type, source, target, rel.props
                )


def ingest_script(text, source_name="<string>"):
    """Build a property graph from a graph script.

    Parameters
    ----------
    text : str
    source_name : str

    Returns
    -------
    PropertyGraph
    """
    try:
        tree = _parser.parse(text)
    except UnexpectedInput as error:
        raise syntax_error(
            _parser, text, error, ScriptParseError, source_name
        ) from None
    statements = _ScriptTransformer().transform(tree)

    builder = _GraphBuilder(text, source_name)
    for keyword, paths, _ in statements:
        builder.statement(keyword, paths)
    logger.debug(f"Ingested {source_name}: {builder.graph!r}")
    return builder.graph


# ------------------------------- #
#   EXPORT                        #
# ------------------------------- #


_PLAIN_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def format_name(name):
    if _PLAIN_NAME.fullmatch(name) and name.lower() not in (
        "create",
        "merge",
        "true",
        "false",
    ):
        return name
    return f"`{name}`"


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return json.dumps(value, ensure_ascii=False)


def format_props(props):
    if not props:
        return ""
    items = ", ".join(
        f"{format_name(k)}: {format_value(v)}" for k, v in props.items()
    )
    return f" {{{items}}}"


def export_script(graph):
    """Deterministic script that re-creates ``graph``: nodes by id,
    then relationships by id.
    """
    lines = []
    for node_id in graph.node_ids():
        node = graph.nodes[node_id]
        labels = "".join(f":{format_name(label)}" for label in node.labels)
        lines.append(
            f"CREATE ({format_name(node_id)}{labels}"
            f"{format_props(node.props)})"
        )
    for rel in graph.rels:
        lines.append(
            f"CREATE ({format_name(rel.source)})"
            f"-[:{format_name(rel.type)}{format_props(rel.props)}]->"
            f"({format_name(rel.target)})"
        )
    return "".join(line + "\n" for line in lines)
