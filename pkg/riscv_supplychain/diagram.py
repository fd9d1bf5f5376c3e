"""Parser and canonical serializer for the supported subset of PlantUML
activity diagrams.

The subset is line oriented: every construct sits on its own line.

    @startuml
    |Lane|
    start
    :Activity label;
    note right: produces: Artifact
    if (condition?) then (yes)
      ...
    else (no)
      ...
    endif
    fork
      ...
    fork again
      ...
    end fork
    repeat
      ...
    repeat while (condition?) is (no)
    stop
    @enduml

Blank lines and ``'`` comment lines are skipped. Any other construct is
rejected with a DiagramParseError.
"""

import re
from dataclasses import dataclass, field
from itertools import count

from treelib import Tree

from riscv_supplychain.exceptions import DiagramParseError

INDENT = "  "


@dataclass(frozen=True)
class LaneSwitch:
    lane: str


@dataclass(frozen=True)
class Activity:
    label: str


@dataclass(frozen=True)
class StartMarker:
    pass


@dataclass(frozen=True)
class StopMarker:
    pass


@dataclass(frozen=True)
class Note:
    """Note attached to the preceding activity."""

    text: str
    side: str = "right"


@dataclass(frozen=True)
class IfBlock:
    condition: str
    then_label: str
    then_body: tuple
    else_label: str | None = None
    else_body: tuple | None = None


@dataclass(frozen=True)
class ForkBlock:
    branches: tuple


@dataclass(frozen=True)
class RepeatBlock:
    """``repeat ... repeat while (cond) is (lbl)``.

    ``loop_label`` is the ``is (...)`` label, guarding the back-edge.
    """

    body: tuple
    while_condition: str
    loop_label: str | None = None


@dataclass(frozen=True)
class DiagramAst:
    elements: tuple
    source_name: str = field(default="<string>", compare=False)

    def lanes(self):
        """Distinct lane names in order of first appearance."""
        seen = []
        for element in walk(self.elements):
            if isinstance(element, LaneSwitch) and element.lane not in seen:
                seen.append(element.lane)
        return seen

    def activities(self):
        """Activity labels and decision conditions, in traversal order."""
        labels = []
        for element in walk(self.elements):
            if isinstance(element, Activity):
                labels.append(element.label)
            elif isinstance(element, IfBlock):
                labels.append(element.condition)
            elif isinstance(element, RepeatBlock):
                labels.append(element.while_condition)
        return labels

    @property
    def tree(self):
        """Returns a Treelib.tree object with the block structure."""
        return diagram_tree(self)

    def __repr__(self):
        return self.tree.show(stdout=False)


def walk(elements):
    """Yield every element, blocks before their children (pre-order)."""
    for element in elements:
        yield element
        if isinstance(element, IfBlock):
            yield from walk(element.then_body)
            yield from walk(element.else_body or ())
        elif isinstance(element, ForkBlock):
            for branch in element.branches:
                yield from walk(branch)
        elif isinstance(element, RepeatBlock):
            yield from walk(element.body)


# ------------------------------- #
#   LINE CLASSIFICATION           #
# ------------------------------- #

_LINE_PATTERNS = [
    ("startuml", re.compile(r"^@startuml(\s+\S.*)?$")),
    ("enduml", re.compile(r"^@enduml$")),
    ("start", re.compile(r"^start$")),
    ("stop", re.compile(r"^(stop|end)$")),
    ("lane", re.compile(r"^\|(?P<lane>[^|#]+)\|$")),
    ("activity", re.compile(r"^:(?P<label>.*);$")),
    (
        "if",
        re.compile(r"^if\s*\((?P<cond>.*)\)\s*then\s*\((?P<label>.*)\)$"),
    ),
    ("if", re.compile(r"^if\s*\((?P<cond>.*)\)\s*then$")),
    ("else", re.compile(r"^else\s*\((?P<label>.*)\)$")),
    ("else", re.compile(r"^else$")),
    ("endif", re.compile(r"^endif$")),
    ("fork_again", re.compile(r"^fork\s+again$")),
    ("end_fork", re.compile(r"^end\s+fork$")),
    ("fork", re.compile(r"^fork$")),
    (
        "repeat_while",
        re.compile(
            r"^repeat\s+while\s*\((?P<cond>.*)\)\s*is\s*\((?P<label>.*)\)$"
        ),
    ),
    ("repeat_while", re.compile(r"^repeat\s+while\s*\((?P<cond>.*)\)$")),
    ("repeat", re.compile(r"^repeat$")),
    (
        "note",
        re.compile(r"^note\s+(?P<side>left|right)\s*:\s*(?P<text>.*)$"),
    ),
]

_CLOSERS = {
    "if": "endif",
    "fork": "end fork",
    "repeat": "repeat while (...)",
}


@dataclass
class _Line:
    number: int
    column: int
    kind: str
    text: str
    groups: dict


class _LineReader:
    def __init__(self, text, source_name):
        self.source_name = source_name
        self.raw_lines = text.replace("\r\n", "\n").replace("\r", "\n")
        self.raw_lines = self.raw_lines.split("\n")
        if self.raw_lines and self.raw_lines[-1] == "":
            self.raw_lines.pop()
        self.lines = []
        for number, raw in enumerate(self.raw_lines, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("'"):
                continue
            column = len(raw) - len(raw.lstrip()) + 1
            self.lines.append(self._classify(number, column, stripped))
        self.position = 0

    def error(self, message, line=None, column=1):
        n_lines = max(len(self.raw_lines), 1)
        if line is None:
            line = n_lines
        line = min(max(line, 1), n_lines)
        snippet = self.raw_lines[line - 1] if self.raw_lines else ""
        return DiagramParseError(
            message,
            line=line,
            column=column,
            snippet=snippet,
            source_name=self.source_name,
        )

    def _classify(self, number, column, stripped):
        for kind, pattern in _LINE_PATTERNS:
            match = pattern.match(stripped)
            if match:
                return _Line(
                    number, column, kind, stripped, match.groupdict()
                )

        if "->" in stripped:
            raise self.error(
                "arrows are not supported in activity diagrams; flow "
                "follows the order of the lines",
                number,
                column + stripped.index("->"),
            )
        if stripped.startswith(":"):
            raise self.error(
                "expected ';' closing the activity label on the same line",
                number,
                column + len(stripped),
            )
        if stripped.startswith("note"):
            raise self.error(
                "expected single-line note 'note right: text' or "
                "'note left: text'",
                number,
                column,
            )
        keyword = stripped.split()[0]
        raise self.error(
            f"unknown directive '{keyword}'; expected an activity, lane, "
            "start, stop, if, fork, repeat or note",
            number,
            column,
        )

    def peek(self):
        if self.position < len(self.lines):
            return self.lines[self.position]
        return None

    def next(self):
        line = self.peek()
        self.position += 1
        return line


# ------------------------------- #
#   PARSER                        #
# ------------------------------- #


def parse_activity_diagram(text, source_name="<string>"):
    """Parse a PlantUML activity diagram of the supported subset.

    Parameters
    ----------
    text : str
        Complete document between ``@startuml`` and ``@enduml``.
    source_name : str
        Name used in error locations.

    Returns
    -------
    DiagramAst

    Raises
    ------
    DiagramParseError
        On unknown directives, unterminated blocks, misplaced block
        keywords and missing ``@startuml``/``@enduml``.
    """
    reader = _LineReader(text, source_name)

    first = reader.next()
    if first is None or first.kind != "startuml":
        line = first.number if first else None
        raise reader.error("expected '@startuml' to open the diagram", line)

    elements, closer = _parse_body(reader, ("enduml",), opener=None)
    if closer is None:
        raise reader.error("missing '@enduml' at end of the diagram")

    trailing = reader.next()
    if trailing is not None:
        raise reader.error(
            "unexpected content after '@enduml'",
            trailing.number,
            trailing.column,
        )

    return DiagramAst(elements=tuple(elements), source_name=source_name)


def _parse_body(reader, terminators, opener):
    """Parse elements until one of the terminator kinds.

    Returns the parsed elements and the terminating line (None at end of
    input).
    """
    elements = []
    while True:
        line = reader.next()
        if line is None:
            if opener is not None:
                raise _unterminated(reader, opener, None)
            return elements, None

        if line.kind in terminators:
            return elements, line

        if line.kind == "enduml":
            raise _unterminated(reader, opener, line)

        if line.kind == "startuml":
            raise reader.error(
                "unexpected second '@startuml'", line.number, line.column
            )
        elif line.kind == "start":
            elements.append(StartMarker())
        elif line.kind == "stop":
            elements.append(StopMarker())
        elif line.kind == "lane":
            elements.append(LaneSwitch(line.groups["lane"]))
        elif line.kind == "activity":
            label = line.groups["label"]
            if not label.strip():
                raise reader.error(
                    "expected a non-empty activity label",
                    line.number,
                    line.column,
                )
            elements.append(Activity(label))
        elif line.kind == "note":
            _check_note_target(reader, elements, line)
            elements.append(
                Note(
                    text=line.groups["text"].strip(),
                    side=line.groups["side"],
                )
            )
        elif line.kind == "if":
            elements.append(_parse_if(reader, line))
        elif line.kind == "fork":
            elements.append(_parse_fork(reader, line))
        elif line.kind == "repeat":
            elements.append(_parse_repeat(reader, line))
        else:
            raise reader.error(
                f"unexpected '{line.text}' outside a matching block",
                line.number,
                line.column,
            )


def _unterminated(reader, opener, at_line):
    expected = _CLOSERS[opener.kind]
    line = at_line.number if at_line is not None else None
    return reader.error(
        f"expected '{expected}' to close '{opener.kind}' opened at line "
        f"{opener.number}",
        line,
    )


def _check_note_target(reader, elements, line):
    for previous in reversed(elements):
        if isinstance(previous, Note):
            continue
        if isinstance(previous, Activity):
            return
        break
    raise reader.error(
        "a note must directly follow an activity", line.number, line.column
    )


def _parse_if(reader, opener):
    condition = opener.groups["cond"]
    if not condition.strip():
        raise reader.error(
            "expected a non-empty condition in 'if (...)'",
            opener.number,
            opener.column,
        )
    then_label = (opener.groups.get("label") or "").strip()

    then_body, closer = _parse_body(reader, ("else", "endif"), opener)
    else_label, else_body = None, None
    if closer.kind == "else":
        else_label = (closer.groups.get("label") or "").strip()
        else_body, closer = _parse_body(reader, ("endif",), opener)
        else_body = tuple(else_body)

    return IfBlock(
        condition=condition,
        then_label=then_label,
        then_body=tuple(then_body),
        else_label=else_label,
        else_body=else_body,
    )


def _parse_fork(reader, opener):
    branches = []
    while True:
        body, closer = _parse_body(
            reader, ("fork_again", "end_fork"), opener
        )
        if not body:
            raise reader.error(
                "a fork branch must contain at least one element",
                closer.number,
                closer.column,
            )
        branches.append(tuple(body))
        if closer.kind == "end_fork":
            break

    if len(branches) < 2:
        raise reader.error(
            "a fork needs at least two branches separated by 'fork again'",
            opener.number,
            opener.column,
        )
    return ForkBlock(branches=tuple(branches))


def _parse_repeat(reader, opener):
    body, closer = _parse_body(reader, ("repeat_while",), opener)
    if not body:
        raise reader.error(
            "a repeat body must contain at least one element",
            closer.number,
            closer.column,
        )
    condition = closer.groups["cond"]
    if not condition.strip():
        raise reader.error(
            "expected a non-empty condition in 'repeat while (...)'",
            closer.number,
            closer.column,
        )
    label = closer.groups.get("label")
    return RepeatBlock(
        body=tuple(body),
        while_condition=condition,
        loop_label=label.strip() if label is not None else None,
    )


# ------------------------------- #
#   SERIALIZER                    #
# ------------------------------- #


def serialize_ast(ast):
    """Canonical text of a diagram: one construct per line, two-space
    indentation inside blocks, LF line endings and one trailing newline.

    Parameters
    ----------
    ast : DiagramAst

    Returns
    -------
    str
    """
    lines = ["@startuml"]
    _serialize_body(ast.elements, 0, lines)
    lines.append("@enduml")
    return "\n".join(lines) + "\n"


def _serialize_body(elements, depth, lines):
    pad = INDENT * depth
    for element in elements:
        if isinstance(element, LaneSwitch):
            lines.append(f"{pad}|{element.lane}|")
        elif isinstance(element, Activity):
            lines.append(f"{pad}:{element.label};")
        elif isinstance(element, StartMarker):
            lines.append(f"{pad}start")
        elif isinstance(element, StopMarker):
            lines.append(f"{pad}stop")
        elif isinstance(element, Note):
            lines.append(f"{pad}note {element.side}: {element.text}")
        elif isinstance(element, IfBlock):
            header = f"{pad}if ({element.condition}) then"
            if element.then_label:
                header += f" ({element.then_label})"
            lines.append(header)
            _serialize_body(element.then_body, depth + 1, lines)
            if element.else_body is not None:
                other = f"{pad}else"
                if element.else_label:
                    other += f" ({element.else_label})"
                lines.append(other)
                _serialize_body(element.else_body, depth + 1, lines)
            lines.append(f"{pad}endif")
        elif isinstance(element, ForkBlock):
            for index, branch in enumerate(element.branches):
                keyword = "fork" if index == 0 else "fork again"
                lines.append(f"{pad}{keyword}")
                _serialize_body(branch, depth + 1, lines)
            lines.append(f"{pad}end fork")
        elif isinstance(element, RepeatBlock):
            lines.append(f"{pad}repeat")
            _serialize_body(element.body, depth + 1, lines)
            footer = f"{pad}repeat while ({element.while_condition})"
            if element.loop_label is not None:
                footer += f" is ({element.loop_label})"
            lines.append(footer)
        else:
            raise TypeError(f"Not a diagram element: {element!r}")


# ------------------------------- #
#   TREE VIEW                     #
# ------------------------------- #


def diagram_tree(ast):
    """
    Creates a 'tree' graph with the block structure of a diagram, in the
    way structures hierarchies are shown.
    """
    tree = Tree()
    ids = count()
    root = next(ids)
    tree.create_node(tag=ast.source_name, identifier=root)

    def add(elements, parent):
        for element in elements:
            identifier = next(ids)
            if isinstance(element, IfBlock):
                tree.create_node(
                    f"if ({element.condition})", identifier, parent=parent
                )
                branch = next(ids)
                tree.create_node(
                    f"then ({element.then_label})", branch, parent=identifier
                )
                add(element.then_body, branch)
                if element.else_body is not None:
                    branch = next(ids)
                    tree.create_node(
                        f"else ({element.else_label})",
                        branch,
                        parent=identifier,
                    )
                    add(element.else_body, branch)
            elif isinstance(element, ForkBlock):
                tree.create_node("fork", identifier, parent=parent)
                for index, body in enumerate(element.branches):
                    branch = next(ids)
                    tree.create_node(
                        f"branch {index}", branch, parent=identifier
                    )
                    add(body, branch)
            elif isinstance(element, RepeatBlock):
                tree.create_node(
                    f"repeat while ({element.while_condition})",
                    identifier,
                    parent=parent,
                )
                add(element.body, identifier)
            else:
                tree.create_node(_leaf_tag(element), identifier, parent=parent)

    add(ast.elements, root)
    return tree


def _leaf_tag(element):
    if isinstance(element, LaneSwitch):
        return f"|{element.lane}|"
    if isinstance(element, Activity):
        return f":{element.label};"
    if isinstance(element, Note):
        return f"note: {element.text}"
    if isinstance(element, StartMarker):
        return "start"
    return "stop"
