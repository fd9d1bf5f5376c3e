"""Read-only graph queries.

The supported subset is a single ``MATCH`` of comma-separated path
patterns, an optional ``WHERE`` over property comparisons, ``RETURN``
with optional ``DISTINCT``, ``count`` aggregates and aliases, and optional
``ORDER BY`` and ``LIMIT``::

    MATCH (a:Company)-[:SUPPLIES*1..3]->(f:Foundry {name: "TSMC"})
    WHERE a.region <> "Taiwan" AND (a.tier = 1 OR a.tier > 3)
    RETURN a.name AS supplier, count(f) ORDER BY supplier DESC LIMIT 5

Patterns match with relationship uniqueness: one binding never uses the
same relationship twice. Comparisons follow three-valued logic, so a
missing property filters the binding out.
"""

import itertools
from dataclasses import dataclass

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError
from loguru import logger

from riscv_supplychain.descriptors import (
    MAX_INTERMEDIATE_BINDINGS,
    MAX_VAR_LENGTH,
)
from riscv_supplychain.exceptions import QueryParseError, QueryResourceError
from riscv_supplychain.kg.script import (
    parse_number,
    syntax_error,
    unquote_string,
)
from riscv_supplychain.utils import (
    canonical_dumps,
    locate,
    render_table,
    render_value,
)

QUERY_GRAMMAR = r"""
start: matching [where] returns [order] [limit] ";"?

matching: MATCH path ("," path)*
path: node_pattern (rel_pattern node_pattern)*

node_pattern: "(" [NAME] label* [props] ")"
label: ":" NAME

rel_pattern: "-" "[" [NAME] [rel_types] [hops] "]" "->"   -> out_rel
           | "<-" "[" [NAME] [rel_types] [hops] "]" "-"   -> in_rel
           | "-" "->"                                     -> out_bare
           | "<-" "-"                                     -> in_bare
rel_types: ":" NAME ("|" ":"? NAME)*
hops: STAR                          -> hops_any
    | STAR INT                      -> hops_exact
    | STAR [INT] DOTS [INT]         -> hops_range

props: "{" [prop ("," prop)*] "}"
prop: NAME ":" literal

where: WHERE expr

?expr: and_expr
     | expr OR and_expr             -> or_op
?and_expr: condition
         | and_expr AND condition   -> and_op
?condition: operand COMP_OP operand -> comparison
          | "(" expr ")"

?operand: reference
        | literal

reference: NAME "." NAME            -> prop_ref
         | NAME                     -> var_ref

literal: STRING                     -> string
       | NUMBER                     -> number
       | TRUE                       -> true
       | FALSE                      -> false

returns: RETURN [DISTINCT] return_item ("," return_item)*
return_item: projection [AS NAME]
?projection: COUNT "(" STAR ")"     -> count_star
           | COUNT "(" reference ")" -> count_of
           | reference

order: ORDER BY projection [DIRECTION]
limit: LIMIT INT

MATCH.2: /match\b/i
WHERE.2: /where\b/i
RETURN.2: /return\b/i
DISTINCT.2: /distinct\b/i
AS.2: /as\b/i
ORDER.2: /order\b/i
BY.2: /by\b/i
LIMIT.2: /limit\b/i
AND.2: /and\b/i
OR.2: /or\b/i
DIRECTION.2: /asc\b|desc\b|ascending\b|descending\b/i
COUNT.2: /count(?=\s*\()/i
TRUE.2: /true\b/i
FALSE.2: /false\b/i

STAR: "*"
DOTS: ".."
COMP_OP: "<>" | "<=" | ">=" | "=" | "<" | ">"
NAME: /[A-Za-z_][A-Za-z0-9_]*/ | /`[^`\n]+`/
STRING: /"(?:[^"\\\n]|\\.)*"/ | /'(?:[^'\\\n]|\\.)*'/
NUMBER: /-?\d+(\.\d+)?([eE][-+]?\d+)?/
INT: /\d+/

COMMENT: /\/\/[^\n]*/
%import common.WS
%ignore WS
%ignore COMMENT
"""


# ------------------------------- #
#   QUERY AST                     #
# ------------------------------- #


@dataclass(frozen=True)
class NodePattern:
    var: str
    labels: tuple = ()
    props: tuple = ()
    anonymous: bool = False


@dataclass(frozen=True)
class RelPattern:
    var: str
    types: tuple = ()
    outgoing: bool = True
    min_hops: int = 1
    max_hops: int = 1
    variable_length: bool = False
    anonymous: bool = False


@dataclass(frozen=True)
class PathPattern:
    nodes: tuple
    rels: tuple


@dataclass(frozen=True)
class Literal:
    value: object


@dataclass(frozen=True)
class VariableRef:
    var: str

    def text(self):
        return self.var


@dataclass(frozen=True)
class PropertyRef:
    var: str
    key: str

    def text(self):
        return f"{self.var}.{self.key}"


@dataclass(frozen=True)
class Comparison:
    left: object
    op: str
    right: object


@dataclass(frozen=True)
class BoolOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Count:
    """``count(*)`` when ``of`` is None."""

    of: object = None

    def text(self):
        inner = "*" if self.of is None else self.of.text()
        return f"count({inner})"


@dataclass(frozen=True)
class ReturnItem:
    expr: object
    alias: str | None = None

    @property
    def column(self):
        return self.alias or self.expr.text()

    @property
    def is_aggregate(self):
        return isinstance(self.expr, Count)


@dataclass(frozen=True)
class OrderBy:
    column: int
    descending: bool = False


@dataclass(frozen=True)
class QueryAst:
    """Parsed query.

    Parameters
    ----------
    patterns : tuple of PathPattern
        Anonymous pattern elements carry generated variables starting
        with "#".
    where : Comparison, BoolOp or None
    returns : tuple of ReturnItem
    distinct : bool
    order_by : OrderBy or None
        Refers to a returned column by index.
    limit : int or None
    """

    patterns: tuple
    where: object = None
    returns: tuple = ()
    distinct: bool = False
    order_by: OrderBy | None = None
    limit: int | None = None

    @property
    def columns(self):
        return tuple(item.column for item in self.returns)

    def node_patterns(self):
        return [n for p in self.patterns for n in p.nodes]

    def rel_patterns(self):
        return [r for p in self.patterns for r in p.rels]


@dataclass(frozen=True)
class ResultTable:
    columns: tuple
    rows: tuple

    def render(self):
        return render_table(self.columns, self.rows)

    def to_json(self):
        rows = [list(row) for row in self.rows]
        return canonical_dumps({"columns": list(self.columns), "rows": rows})

    def __len__(self):
        return len(self.rows)


# ------------------------------- #
#   PARSING                       #
# ------------------------------- #


def _name(token):
    text = str(token)
    return text[1:-1] if text.startswith("`") else text


class _Located(Exception):
    def __init__(self, token, message):
        self.line = getattr(token, "line", None) or 1
        self.column = getattr(token, "column", None) or 1
        self.message = message


def _ref_count(expr):
    if isinstance(expr, Count):
        return 0 if expr.of is None else 1
    return 1


@v_args(meta=True)
class _QueryTransformer(Transformer):
    """Builds the query parts. Pattern elements come out paired with
    their variable token (None when anonymous) for later checks."""

    def __init__(self):
        super().__init__()
        self.anonymous = itertools.count(1)
        self.references = []

    def start(self, meta, children):
        paths, where, returns, order, limit = children
        distinct, items = returns
        return {
            "paths": paths,
            "where": where,
            "distinct": distinct,
            "items": items,
            "order": order,
            "limit": limit,
        }

    def matching(self, meta, children):
        return children[1:]

    def path(self, meta, children):
        return PathPattern(tuple(children[0::2]), tuple(children[1::2]))

    def node_pattern(self, meta, children):
        name, *labels, props = children
        anonymous = name is None
        var = f"#n{next(self.anonymous)}" if anonymous else _name(name)
        pattern = NodePattern(
            var, tuple(labels), tuple((props or {}).items()), anonymous
        )
        return pattern, name

    def label(self, meta, children):
        return _name(children[0])

    def _rel(self, name, types, hops, outgoing):
        min_hops, max_hops, variable = 1, 1, False
        if hops is not None:
            variable = True
            min_hops, max_hops = hops
            if name is not None:
                raise _Located(
                    name,
                    "a variable-length relationship cannot be bound to a "
                    "variable",
                )
        anonymous = name is None
        var = f"#r{next(self.anonymous)}" if anonymous else _name(name)
        pattern = RelPattern(
            var,
            tuple(types or ()),
            outgoing,
            min_hops,
            max_hops,
            variable,
            anonymous,
        )
        return pattern, name

    def out_rel(self, meta, children):
        return self._rel(*children, outgoing=True)

    def in_rel(self, meta, children):
        return self._rel(*children, outgoing=False)

    def out_bare(self, meta, children):
        return self._rel(None, None, None, outgoing=True)

    def in_bare(self, meta, children):
        return self._rel(None, None, None, outgoing=False)

    def rel_types(self, meta, children):
        return [_name(c) for c in children]

    def hops_any(self, meta, children):
        return (1, MAX_VAR_LENGTH)

    def hops_exact(self, meta, children):
        star, count = children
        return _hop_range(star, int(count), int(count))

    def hops_range(self, meta, children):
        star, low, _, high = children
        low = 1 if low is None else int(low)
        high = MAX_VAR_LENGTH if high is None else int(high)
        return _hop_range(star, low, high)

    def props(self, meta, children):
        return dict(c for c in children if c is not None)

    def prop(self, meta, children):
        return (_name(children[0]), children[1].value)

    def where(self, meta, children):
        return children[1]

    def or_op(self, meta, children):
        return BoolOp("OR", children[0], children[2])

    def and_op(self, meta, children):
        return BoolOp("AND", children[0], children[2])

    def comparison(self, meta, children):
        left, op, right = children
        return Comparison(left, str(op), right)

    def prop_ref(self, meta, children):
        var, key = children
        self.references.append(var)
        return PropertyRef(_name(var), _name(key))

    def var_ref(self, meta, children):
        self.references.append(children[0])
        return VariableRef(_name(children[0]))

    def string(self, meta, children):
        return Literal(unquote_string(children[0]))

    def number(self, meta, children):
        return Literal(parse_number(children[0]))

    def true(self, meta, children):
        return Literal(True)

    def false(self, meta, children):
        return Literal(False)

    def returns(self, meta, children):
        _, distinct, *items = children
        return (distinct is not None, items)

    def return_item(self, meta, children):
        expr, _, alias = (children + [None, None])[:3]
        return ReturnItem(expr, _name(alias) if alias is not None else None)

    def count_star(self, meta, children):
        return Count()

    def count_of(self, meta, children):
        return Count(children[1])

    def order(self, meta, children):
        _, by, expr, direction = children
        # The sort key names a returned column, so its variables are
        # checked against the return items instead of the pattern.
        for _ in range(_ref_count(expr)):
            self.references.pop()
        descending = False
        if direction is not None:
            descending = str(direction).lower().startswith("desc")
        return (expr, descending, by)

    def limit(self, meta, children):
        return children[1]


def _hop_range(star, low, high):
    if low < 1 or high < low:
        raise _Located(
            star, f"invalid hop range *{low}..{high}; need max >= min >= 1"
        )
    if high > MAX_VAR_LENGTH:
        raise _Located(
            star,
            f"hop range *{low}..{high} exceeds the maximum of "
            f"{MAX_VAR_LENGTH}",
        )
    return (low, high)


_parser = Lark(QUERY_GRAMMAR, parser="lalr", propagate_positions=True)


def _unwrap_patterns(paths):
    """Split the (pattern, name token) pairs the transformer produced."""
    patterns, names = [], []
    for path in paths:
        nodes = tuple(node for node, _ in path.nodes)
        rels = tuple(rel for rel, _ in path.rels)
        patterns.append(PathPattern(nodes, rels))
        names.extend(
            (pattern, token)
            for pattern, token in path.nodes + path.rels
            if token is not None
        )
    return patterns, names


def parse_query(text, source_name="<query>"):
    """Parse a query of the supported subset.

    Parameters
    ----------
    text : str
    source_name : str

    Returns
    -------
    QueryAst
    """
    try:
        tree = _parser.parse(text)
    except UnexpectedInput as error:
        raise syntax_error(
            _parser, text, error, QueryParseError, source_name
        ) from None

    transformer = _QueryTransformer()
    try:
        try:
            parts = transformer.transform(tree)
        except VisitError as error:
            if isinstance(error.orig_exc, _Located):
                raise error.orig_exc from None
            raise
        return _build_query(parts, transformer.references)
    except _Located as error:
        raise locate(
            text,
            error.line,
            error.column,
            error.message,
            QueryParseError,
            source_name,
        ) from None


def _build_query(parts, references):
    patterns, names = _unwrap_patterns(parts["paths"])

    node_vars, rel_vars = set(), set()
    for pattern, token in names:
        if isinstance(pattern, RelPattern):
            if pattern.var in rel_vars:
                raise _Located(
                    token, f"relationship variable '{pattern.var}' bound twice"
                )
            rel_vars.add(pattern.var)
        else:
            node_vars.add(pattern.var)
        if pattern.var in node_vars and pattern.var in rel_vars:
            raise _Located(
                token,
                f"'{pattern.var}' is used both as a node and as a "
                "relationship",
            )

    bound = node_vars | rel_vars
    for token in references:
        if _name(token) not in bound:
            raise _Located(token, f"variable '{_name(token)}' is not bound")

    items = tuple(parts["items"])
    order_by = None
    if parts["order"] is not None:
        expr, descending, by = parts["order"]
        column = _order_column(items, expr)
        if column is None:
            raise _Located(
                by, "ORDER BY must name a returned column or its alias"
            )
        order_by = OrderBy(column, descending)

    limit = None
    if parts["limit"] is not None:
        limit = int(parts["limit"])
        if limit < 1:
            raise _Located(parts["limit"], "LIMIT must be a positive integer")

    return QueryAst(
        patterns=tuple(patterns),
        where=parts["where"],
        returns=items,
        distinct=parts["distinct"],
        order_by=order_by,
        limit=limit,
    )


def _order_column(items, expr):
    for index, item in enumerate(items):
        if item.expr == expr:
            return index
    if isinstance(expr, VariableRef):
        for index, item in enumerate(items):
            if item.alias == expr.var:
                return index
    return None


# ------------------------------- #
#   EVALUATION                    #
# ------------------------------- #


def _kind(value):
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "number"
    return "text"


def compare(left, op, right):
    """Three-valued comparison: None when either side is null or the
    values are not comparable."""
    if left is None or right is None:
        return None
    same = _kind(left) == _kind(right)
    if op == "=":
        return same and left == right
    if op == "<>":
        return not (same and left == right)
    if not same or _kind(left) == "bool":
        return None
    if op == "<":
        return left < right
    if op == ">":
        return left > right
    if op == "<=":
        return left <= right
    return left >= right


def _and(left, right):
    if left is False or right is False:
        return False
    if left is None or right is None:
        return None
    return True


def _or(left, right):
    if left is True or right is True:
        return True
    if left is None or right is None:
        return None
    return False


class _Binding:
    """Read access to the values of one match."""

    def __init__(self, graph, rel_index, nodes, rels):
        self.graph = graph
        self.rel_index = rel_index
        self.nodes = nodes
        self.rels = rels

    def value(self, expr):
        if isinstance(expr, Literal):
            return expr.value
        if isinstance(expr, VariableRef):
            if expr.var in self.nodes:
                return self.nodes[expr.var]
            return self.rels.get(expr.var)
        if expr.var in self.nodes:
            props = self.graph.nodes[self.nodes[expr.var]].props
        else:
            props = self.rel_index[self.rels[expr.var]].props
        return props.get(expr.key)

    def test(self, condition):
        if condition is None:
            return True
        if isinstance(condition, Comparison):
            return compare(
                self.value(condition.left),
                condition.op,
                self.value(condition.right),
            )
        left = self.test(condition.left)
        right = self.test(condition.right)
        if condition.op == "AND":
            return _and(left, right)
        return _or(left, right)


def node_matches(pattern, node):
    if not set(pattern.labels) <= set(node.labels):
        return False
    return all(
        compare(node.props.get(key), "=", value) is True
        for key, value in pattern.props
    )


def _type_matches(pattern, rel):
    return not pattern.types or rel.type in pattern.types


class _Guard:
    def __init__(self, limit):
        self.limit = limit
        self.count = 0

    def tick(self):
        self.count += 1
        if self.count > self.limit:
            raise QueryResourceError(
                f"query exceeded {self.limit} intermediate bindings"
            )


def _hop(rel, current, outgoing):
    """Far end of ``rel`` when leaving ``current`` in the pattern
    direction, or None."""
    if outgoing and rel.source == current:
        return rel.target
    if not outgoing and rel.target == current:
        return rel.source
    return None


def _match(query, graph, guard):
    """Backtracking matcher yielding (node binding, rel binding)."""
    out_index, in_index = {}, {}
    for rel in graph.rels:
        out_index.setdefault(rel.source, []).append(rel)
        in_index.setdefault(rel.target, []).append(rel)
    node_ids = graph.node_ids()

    steps = []
    for path in query.patterns:
        steps.append(("start", path.nodes[0], None))
        for rel, node in zip(path.rels, path.nodes[1:]):
            steps.append(("expand", node, rel))

    nodes, rels, used = {}, {}, set()

    def bind_node(pattern, node_id):
        """Bind ``pattern`` to ``node_id``; returns whether it was newly
        bound, or None if it does not match."""
        if not node_matches(pattern, graph.nodes[node_id]):
            return None
        if pattern.var in nodes:
            return False if nodes[pattern.var] == node_id else None
        nodes[pattern.var] = node_id
        return True

    def search(index, current):
        if index == len(steps):
            yield dict(nodes), dict(rels)
            return
        kind, node_pattern, rel_pattern = steps[index]

        if kind == "start":
            candidates = (
                [nodes[node_pattern.var]]
                if node_pattern.var in nodes
                else node_ids
            )
            for node_id in candidates:
                guard.tick()
                fresh = bind_node(node_pattern, node_id)
                if fresh is None:
                    continue
                yield from search(index + 1, node_id)
                if fresh:
                    del nodes[node_pattern.var]
            return

        adjacency = out_index if rel_pattern.outgoing else in_index

        def walk(at, depth):
            if depth >= rel_pattern.min_hops:
                guard.tick()
                fresh = bind_node(node_pattern, at)
                if fresh is not None:
                    yield from search(index + 1, at)
                    if fresh:
                        del nodes[node_pattern.var]
            if depth == rel_pattern.max_hops:
                return
            for rel in adjacency.get(at, ()):
                if rel.id in used or not _type_matches(rel_pattern, rel):
                    continue
                used.add(rel.id)
                if not rel_pattern.variable_length:
                    rels[rel_pattern.var] = rel.id
                yield from walk(_hop(rel, at, rel_pattern.outgoing), depth + 1)
                if not rel_pattern.variable_length:
                    del rels[rel_pattern.var]
                used.discard(rel.id)

        yield from walk(current, 0)

    yield from search(0, None)


def _rel_index(graph):
    return {rel.id: rel for rel in graph.rels}


def _typed(values):
    """Grouping key under which booleans never equal numbers."""
    return tuple((_kind(value), value) for value in values)


def _project(query, graph, matches):
    rel_index = _rel_index(graph)
    bindings = []
    for nodes, rels in matches:
        binding = _Binding(graph, rel_index, nodes, rels)
        if binding.test(query.where) is True:
            bindings.append(binding)

    items = query.returns
    if any(item.is_aggregate for item in items):
        keys = [i for i, item in enumerate(items) if not item.is_aggregate]
        groups = {}
        for binding in bindings:
            values = tuple(binding.value(items[i].expr) for i in keys)
            groups.setdefault(_typed(values), (values, []))[1].append(
                binding
            )
        if not groups and not keys:
            groups[()] = ((), [])
        rows = []
        for key, members in groups.values():
            values = iter(key)
            row = []
            for item in items:
                if not item.is_aggregate:
                    row.append(next(values))
                elif item.expr.of is None:
                    row.append(len(members))
                else:
                    row.append(
                        sum(
                            1
                            for b in members
                            if b.value(item.expr.of) is not None
                        )
                    )
            rows.append(tuple(row))
    else:
        rows = [
            tuple(binding.value(item.expr) for item in items)
            for binding in bindings
        ]

    if query.distinct:
        unique = {}
        for row in rows:
            unique.setdefault(_typed(row), row)
        rows = list(unique.values())
    rows.sort(key=lambda row: tuple(render_value(v) for v in row))
    if query.order_by is not None:
        column = query.order_by.column
        rows.sort(
            key=lambda row: _order_key(row[column]),
            reverse=query.order_by.descending,
        )
    if query.limit is not None:
        rows = rows[: query.limit]
    return ResultTable(query.columns, tuple(rows))


def _order_key(value):
    # Nulls sort last ascending and first descending.
    if value is None:
        return (1, 0, 0)
    rank = {"number": 0, "text": 1, "bool": 2}[_kind(value)]
    return (0, rank, value)


def execute(query, graph, max_bindings=MAX_INTERMEDIATE_BINDINGS):
    """Run a parsed query against a property graph.

    Parameters
    ----------
    query : QueryAst
    graph : PropertyGraph
    max_bindings : int
        Intermediate binding guard.

    Returns
    -------
    ResultTable
    """
    guard = _Guard(max_bindings)
    table = _project(query, graph, _match(query, graph, guard))
    logger.debug(
        f"Query matched {len(table)} rows after {guard.count} bindings"
    )
    return table


def run_query(text, graph):
    """Parse and execute a query text."""
    return execute(parse_query(text), graph)


# ------------------------------- #
#   BRUTE-FORCE ORACLE            #
# ------------------------------- #


def _chain_end(start, sequence, outgoing):
    current = start
    for rel in sequence:
        current = _hop(rel, current, outgoing)
        if current is None:
            return None
    return current


def brute_force_match(query, graph):
    """Evaluate ``query`` by enumerating every assignment of nodes and
    relationships to the pattern and filtering. Exponential; meant for
    graphs of a dozen nodes at most.
    """
    node_vars = list(
        dict.fromkeys(pattern.var for pattern in query.node_patterns())
    )
    rel_patterns = query.rel_patterns()
    node_ids = graph.node_ids()

    def rel_choices(pattern):
        if not pattern.variable_length:
            return [(rel,) for rel in graph.rels]
        return [
            sequence
            for length in range(pattern.min_hops, pattern.max_hops + 1)
            for sequence in itertools.permutations(graph.rels, length)
        ]

    choices = [rel_choices(p) for p in rel_patterns]

    def matches():
        for assignment in itertools.product(node_ids, repeat=len(node_vars)):
            nodes = dict(zip(node_vars, assignment))
            if not all(
                node_matches(p, graph.nodes[nodes[p.var]])
                for p in query.node_patterns()
            ):
                continue
            for sequences in itertools.product(*choices):
                used = [rel.id for seq in sequences for rel in seq]
                if len(used) != len(set(used)):
                    continue
                by_pattern = dict(zip(rel_patterns, sequences))
                if _consistent(query, nodes, by_pattern):
                    rels = {
                        p.var: seq[0].id
                        for p, seq in by_pattern.items()
                        if not p.variable_length
                    }
                    yield nodes, rels

    return _project(query, graph, matches())


def _consistent(query, nodes, by_pattern):
    for path in query.patterns:
        for rel_pattern, left, right in zip(
            path.rels, path.nodes, path.nodes[1:]
        ):
            sequence = by_pattern[rel_pattern]
            if not all(_type_matches(rel_pattern, r) for r in sequence):
                return False
            end = _chain_end(nodes[left.var], sequence, rel_pattern.outgoing)
            if end != nodes[right.var]:
                return False
    return True
