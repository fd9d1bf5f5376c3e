"""Exceptions raised by the riscv_supplychain toolchain.

Every text format (diagrams, rule files, graph scripts and queries) reports
problems through a subclass of ParseError, which carries a 1-based
location pointing into the offending input.
"""


class ParseError(Exception):
    """Error in a text input, located by line and column.

    Parameters
    ----------
    message : str
        Description naming the expected construct.
    line : int
        1-based line number.
    column : int
        1-based column number.
    snippet : str
        The offending input line.
    source_name : str
        Name of the input (file name or "<string>").
    """

    def __init__(
        self, message, line=1, column=1, snippet="", source_name="<string>"
    ):
        self.message = message
        self.line = line
        self.column = column
        self.snippet = snippet
        self.source_name = source_name
        super().__init__(str(self))

    def __str__(self):
        return f"{self.source_name}:{self.line}:{self.column}: {self.message}"

    def feedback(self):
        """Render the error the way it is fed back to a language model."""
        text = f"Line {self.line}, column {self.column}: {self.message}"
        if self.snippet:
            text += f"\n    {self.snippet}"
        return text


class DiagramParseError(ParseError):
    pass


class RuleParseError(ParseError):
    pass


class ScriptParseError(ParseError):
    pass


class QueryParseError(ParseError):
    pass


class ModelError(Exception):
    """A process model cannot be built or is structurally invalid."""


class SchemaError(ModelError):
    """A canonical JSON document violates the process model schema."""


class GraphError(Exception):
    """Invalid reference into a property graph."""


class QueryResourceError(Exception):
    """Query execution exceeded the intermediate binding guard."""


class MissingSlotError(KeyError):
    """A prompt template was rendered without one of its slots."""

    def __init__(self, template_id, slot):
        self.template_id = template_id
        self.slot = slot
        super().__init__(f"{template_id}: missing slot [{slot}]")

    def __str__(self):
        return self.args[0]


class EndpointError(ConnectionError):
    """The chat-completions endpoint could not be reached or failed."""


class ExtractionError(Exception):
    """Every attempt of an extraction produced unparseable output.

    Parameters
    ----------
    message : str
    last_error : ParseError or None
        Parser error of the final attempt.
    transcript : Transcript or None
        All recorded attempts.
    """

    def __init__(self, message, last_error=None, transcript=None):
        self.last_error = last_error
        self.transcript = transcript
        super().__init__(message)


class EvaluationError(ValueError):
    pass
