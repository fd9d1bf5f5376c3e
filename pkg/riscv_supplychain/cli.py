"""Command line entry point ``riscv-supplychain``.

Every subcommand except ``extract`` (and ``nl:`` lines of the ``repl``)
runs offline. Exit codes: 0 success, 1 findings (a violated rule or a
mismatching query), 2 usage, parse or I/O errors, 3 endpoint failures.
Errors are printed on standard error as ``error[<kind>]: <message>``.
"""

import sys
from pathlib import Path

import click
from loguru import logger
from rich.console import Console
from rich.table import Table

from riscv_supplychain import __version__
from riscv_supplychain.config import (
    cli_modify_config,
    get_endpoint_config,
    get_transcript_dir,
)
from riscv_supplychain.descriptors import (
    EXIT_ENDPOINT,
    EXIT_FINDINGS,
    EXIT_OK,
    EXIT_USAGE,
    EXTRACTED_DIAGRAM_FILENAME,
    EXTRACTED_GRAPH_FILENAME,
    EXTRACTED_RULES_FILENAME,
    PROCESS_TRUTH_RULES_FILENAME,
    REFERENCE_DIAGRAM_FILENAME,
    REFERENCE_GRAPH_FILENAME,
)
from riscv_supplychain.diagram import parse_activity_diagram, serialize_ast
from riscv_supplychain.evaluation import (
    GroundTruth,
    load_query_cases,
    match_graph,
    match_process,
    query_pairs,
    reports_to_json,
    score_queries,
    summarize,
)
from riscv_supplychain.exceptions import (
    EndpointError,
    EvaluationError,
    ExtractionError,
    GraphError,
    ModelError,
    ParseError,
    QueryResourceError,
)
from riscv_supplychain.genai.extraction import (
    extract_graph,
    extract_process_diagram,
    formalize_rules,
    nl_to_query,
)
from riscv_supplychain.genai.transport import (
    OpenAIChatTransport,
    ReplayTransport,
    Transcript,
)
from riscv_supplychain.kg.analytics import (
    articulation_points,
    bridges,
    degree_centrality,
    trace_paths,
)
from riscv_supplychain.kg.query import execute, parse_query
from riscv_supplychain.kg.script import export_script, ingest_script
from riscv_supplychain.process_model import (
    from_canonical_json,
    lower_to_model,
    to_canonical_json,
)
from riscv_supplychain.rules import (
    VIOLATED,
    evaluate,
    evaluate_by_paths,
    explain,
    format_rules,
    parse_rules,
    verdicts_to_json,
)
from riscv_supplychain.utils import (
    canonical_dumps,
    fixture_path,
    natural_key,
    read_text,
    render_value,
    write_text,
)

LOG_LEVELS = {0: "WARNING", 1: "INFO"}
QUIT_WORDS = ("quit", "exit", ":q")
NL_PREFIX = "nl:"


# ------------------------------- #
#   ERROR REPORTING               #
# ------------------------------- #


def classify_error(error):
    """(kind, exit code) of an exception, or None if it is not ours to
    report."""
    if isinstance(error, EndpointError):
        return "endpoint", EXIT_ENDPOINT
    if isinstance(error, ExtractionError):
        return "extraction", EXIT_ENDPOINT
    if isinstance(error, ParseError):
        return "parse", EXIT_USAGE
    if isinstance(error, ModelError):
        return "model", EXIT_USAGE
    if isinstance(error, (GraphError, QueryResourceError)):
        return "query", EXIT_USAGE
    if isinstance(error, (EvaluationError, ValueError, KeyError)):
        return "usage", EXIT_USAGE
    if isinstance(error, OSError):
        return "io", EXIT_USAGE
    return None


def report_error(kind, message):
    click.echo(f"error[{kind}]: {message}", err=True)


class SupplyChainCli(click.Group):
    """Click group mapping toolchain errors to exit codes."""

    def main(self, args=None, prog_name=None, standalone_mode=True, **extra):
        try:
            code = super().main(
                args, prog_name, standalone_mode=False, **extra
            )
        except click.exceptions.UsageError as error:
            report_error("usage", error.format_message())
            code = EXIT_USAGE
        except click.exceptions.ClickException as error:
            report_error("io", error.format_message())
            code = error.exit_code
        except click.exceptions.Abort:
            report_error("usage", "aborted")
            code = EXIT_USAGE
        except Exception as error:
            classified = classify_error(error)
            if classified is None:
                raise
            kind, code = classified
            message = str(error)
            if isinstance(error, KeyError) and error.args:
                message = str(error.args[0])
            report_error(kind, message)

        code = code if isinstance(code, int) else EXIT_OK
        if not standalone_mode:
            return code
        sys.exit(code)


# ------------------------------- #
#   HELPERS                       #
# ------------------------------- #


def _read_input(path):
    if path == "-":
        return click.get_text_stream("stdin").read()
    return read_text(path)


def _emit(ctx, text=None, data=None):
    """Write text, or canonical JSON bytes with ``--format json``."""
    if ctx.obj["format"] == "json" and data is not None:
        click.echo(data, nl=False)
    elif text is not None:
        click.echo(text, nl=False)


def _parse_diagram(path):
    return parse_activity_diagram(_read_input(path), source_name=str(path))


def load_model(path):
    """Process model from canonical JSON or from diagram text."""
    text = _read_input(path)
    if text.lstrip().startswith("{"):
        return from_canonical_json(text)
    return lower_to_model(
        parse_activity_diagram(text, source_name=str(path))
    )


def load_graph(path):
    return ingest_script(_read_input(path), source_name=str(path))


def load_rules(path):
    return parse_rules(_read_input(path), source_name=str(path))


def _node_title(graph, node_id):
    name = graph.nodes[node_id].name
    return f"{node_id} ({name})" if name is not None else node_id


def _rich_table(result):
    table = Table(*result.columns, show_lines=False)
    for row in result.rows:
        table.add_row(*(render_value(value) for value in row))
    return table


# ------------------------------- #
#   ROOT GROUP                    #
# ------------------------------- #


@click.group(
    cls=SupplyChainCli,
    context_settings={"help_option_names": ["-h", "--help"]},
)
@click.version_option(__version__, prog_name="riscv-supplychain")
@click.option(
    "-v", "--verbose", count=True, help="-v for info, -vv for debug logs."
)
@click.option(
    "--format",
    "output_format",
    type=click.Choice(["text", "json"]),
    default="text",
    show_default=True,
)
@click.pass_context
def cli(ctx, verbose, output_format):
    """RISC-V supply chain process and knowledge graph toolchain."""
    logger.remove()
    logger.add(
        sys.stderr,
        level=LOG_LEVELS.get(verbose, "DEBUG"),
        format="{level}: {message}",
    )
    ctx.ensure_object(dict)
    ctx.obj["format"] = output_format


@cli.command()
@click.argument("diagram")
@click.option("--tree", is_flag=True, help="Show the block structure.")
@click.pass_context
def parse(ctx, diagram, tree):
    """Check that DIAGRAM parses."""
    ast = _parse_diagram(diagram)
    lanes, activities = ast.lanes(), ast.activities()
    text = ""
    if tree:
        text += ast.tree.show(stdout=False)
    text += (
        f"{diagram}: ok, {len(lanes)} lanes, "
        f"{len(activities)} activities and decisions\n"
    )
    data = canonical_dumps(
        {"source": str(diagram), "lanes": lanes, "activities": activities}
    )
    _emit(ctx, text, data)


@cli.command()
@click.argument("diagram")
@click.option("-o", "--output", help="Write the JSON document here.")
def model(diagram, output):
    """Emit the canonical JSON process model of DIAGRAM."""
    data = to_canonical_json(lower_to_model(_parse_diagram(diagram)))
    if output:
        write_text(output, data.decode("utf-8"))
    else:
        click.echo(data, nl=False)


@cli.command()
@click.option(
    "--model",
    "model_path",
    required=True,
    help="Canonical JSON model or diagram.",
)
@click.option("--rules", "rules_path", required=True, help="Rule file.")
@click.option(
    "--by-paths",
    is_flag=True,
    help="Check rules by enumerating paths instead of by reachability.",
)
@click.option("--budget", default=2, show_default=True, type=int)
@click.pass_context
def validate(ctx, model_path, rules_path, by_paths, budget):
    """Evaluate a rule file against a process model."""
    process = load_model(model_path)
    rules = load_rules(rules_path)
    if by_paths:
        verdicts = evaluate_by_paths(rules, process, edge_budget=budget)
    else:
        verdicts = evaluate(rules, process)
    _emit(ctx, explain(verdicts, process), verdicts_to_json(verdicts))
    if any(v.status == VIOLATED for v in verdicts):
        return EXIT_FINDINGS
    return EXIT_OK


# ------------------------------- #
#   KNOWLEDGE GRAPH               #
# ------------------------------- #


@cli.group()
def kg():
    """Property graph scripts, queries and analytics."""


@kg.command()
@click.argument("script")
@click.pass_context
def ingest(ctx, script):
    """Load SCRIPT and report its size."""
    graph = load_graph(script)
    labels = sorted({lbl for n in graph.nodes.values() for lbl in n.labels})
    counts = {
        "nodes": len(graph.nodes),
        "relationships": len(graph.rels),
        "attributes": graph.attribute_count,
        "labels": labels,
    }
    text = (
        f"{counts['nodes']} nodes, {counts['relationships']} relationships, "
        f"{counts['attributes']} attributes\n"
    )
    _emit(ctx, text, canonical_dumps(counts))


@kg.command()
@click.argument("script")
@click.argument("query")
@click.pass_context
def query(ctx, script, query):
    """Run QUERY (text, or - for standard input) against SCRIPT."""
    graph = load_graph(script)
    text = _read_input(query) if query == "-" else query
    result = execute(parse_query(text), graph)
    _emit(ctx, result.render(), result.to_json())


@kg.command()
@click.argument("script")
@click.option("-k", "top", default=5, show_default=True, type=int)
@click.pass_context
def analyze(ctx, script, top):
    """Bottlenecks and key participants of SCRIPT."""
    graph = load_graph(script)
    points = sorted(articulation_points(graph), key=natural_key)
    cut_rels = bridges(graph)
    ranking = degree_centrality(graph, top)

    rels = {rel.id: rel for rel in graph.rels}
    lines = ["Articulation points:"]
    lines.extend(f"  {_node_title(graph, p)}" for p in points)
    lines.append("Bridges:")
    lines.extend(
        f"  {r}: ({rels[r].source})-[:{rels[r].type}]->({rels[r].target})"
        for r in cut_rels
    )
    lines.append(f"Top {top} by degree:")
    lines.extend(
        f"  {_node_title(graph, node_id)}: {degree}"
        for node_id, degree in ranking
    )
    data = canonical_dumps(
        {
            "articulation_points": points,
            "bridges": cut_rels,
            "degree": [[node_id, degree] for node_id, degree in ranking],
        }
    )
    _emit(ctx, "\n".join(lines) + "\n", data)


@kg.command()
@click.argument("script")
@click.option("-o", "--output", help="Write the script here.")
def export(script, output):
    """Re-emit SCRIPT in canonical form."""
    text = export_script(load_graph(script))
    if output:
        write_text(output, text)
    else:
        click.echo(text, nl=False)


@cli.command()
@click.argument("script")
@click.option("--from", "source", required=True, help="Node id or name.")
@click.option("--to", "target", required=True, help="Node id or name.")
@click.option("--max-len", default=4, show_default=True, type=int)
@click.pass_context
def trace(ctx, script, source, target, max_len):
    """Trace supply chain paths between two entities of SCRIPT."""
    graph = load_graph(script)
    src = graph.nodes.find(source).id
    dst = graph.nodes.find(target).id
    paths = trace_paths(graph, src, dst, max_len)

    def title(node_id):
        return graph.nodes[node_id].name or node_id

    text = "".join(
        " -> ".join(title(node) for node in path) + "\n" for path in paths
    )
    if not paths:
        text = f"no path from {src} to {dst} within {max_len} steps\n"
    _emit(ctx, text, canonical_dumps(paths))


# ------------------------------- #
#   EXTRACTION                    #
# ------------------------------- #


def _transport(replay, max_retries):
    """Transport and transcript for one extraction."""
    if replay:
        transport = ReplayTransport.from_files(
            replay, 3 if max_retries is None else max_retries
        )
        return transport, Transcript()
    config = get_endpoint_config(max_retries=max_retries)
    return OpenAIChatTransport(config), Transcript(secrets=[config.api_key])


def _transcript_path(transcript_path, replay):
    if transcript_path:
        return Path(transcript_path)
    if replay:
        return None
    return get_transcript_dir() / "transcripts.jsonl"


def _run_extraction(run, replay, max_retries, transcript_path):
    transport, transcript = _transport(replay, max_retries)
    path = _transcript_path(transcript_path, replay)
    try:
        return run(transport, transcript)
    finally:
        if path is not None and len(transcript):
            transcript.write(path)
            logger.info(f"Transcript appended to {path}")


def extraction_options(function):
    function = click.option(
        "--replay",
        multiple=True,
        help="Answer from recorded response files instead of an endpoint.",
    )(function)
    function = click.option("--max-retries", type=int, default=None)(
        function
    )
    function = click.option(
        "--transcript", "transcript_path", help="JSON-lines transcript."
    )(function)
    return function


@cli.group()
def extract():
    """Model-backed extraction (needs an endpoint or --replay)."""


def _description(path, image):
    if path is None and image is None:
        raise click.UsageError("give a DESCRIPTION file or an --image")
    return _read_input(path) if path is not None else ""


@extract.command("process")
@click.argument("description", required=False)
@click.option("--prior", help="Diagram to update.")
@click.option("--image", type=click.Path(exists=True, dir_okay=False))
@extraction_options
@click.pass_context
def extract_process_cmd(
    ctx, description, prior, image, replay, max_retries, transcript_path
):
    """Extract a process diagram from DESCRIPTION."""
    text = _description(description, image)
    prior_text = _read_input(prior) if prior else None

    def run(transport, transcript):
        return extract_process_diagram(
            text,
            prior_text,
            transport,
            image=image,
            transcript=transcript,
        )

    ast = _run_extraction(run, replay, max_retries, transcript_path)
    _emit(ctx, serialize_ast(ast), to_canonical_json(lower_to_model(ast)))


@extract.command("graph")
@click.argument("description", required=False)
@click.option("--prior", help="Graph script to update.")
@click.option("--image", type=click.Path(exists=True, dir_okay=False))
@extraction_options
@click.pass_context
def extract_graph_cmd(
    ctx, description, prior, image, replay, max_retries, transcript_path
):
    """Extract a knowledge graph script from DESCRIPTION."""
    text = _description(description, image)
    prior_graph = load_graph(prior) if prior else None

    def run(transport, transcript):
        return extract_graph(
            text,
            prior_graph,
            transport,
            image=image,
            transcript=transcript,
        )

    graph = _run_extraction(run, replay, max_retries, transcript_path)
    _emit(ctx, export_script(graph))


@extract.command("rules")
@click.argument("free_text")
@click.option(
    "--model", "model_path", required=True, help="Model or diagram."
)
@extraction_options
@click.pass_context
def extract_rules_cmd(
    ctx, free_text, model_path, replay, max_retries, transcript_path
):
    """Formalize the free-text rules in FREE_TEXT against a model."""
    text = _read_input(free_text)
    process = load_model(model_path)

    def run(transport, transcript):
        return formalize_rules(
            text, process, transport, transcript=transcript
        )

    rules = _run_extraction(run, replay, max_retries, transcript_path)
    data = canonical_dumps([rule.to_dict() for rule in rules])
    _emit(ctx, format_rules(rules), data)


@extract.command("query")
@click.argument("request")
@click.option("--graph", "graph_path", required=True, help="Graph script.")
@extraction_options
@click.pass_context
def extract_query_cmd(
    ctx, request, graph_path, replay, max_retries, transcript_path
):
    """Turn the natural-language REQUEST into a query and run it."""
    graph = load_graph(graph_path)

    def run(transport, transcript):
        return nl_to_query(request, graph, transport, transcript=transcript)

    result = execute(
        _run_extraction(run, replay, max_retries, transcript_path), graph
    )
    _emit(ctx, result.render(), result.to_json())


# ------------------------------- #
#   EVALUATION                    #
# ------------------------------- #


@cli.group("eval")
def evaluate_group():
    """Score extractions against ground truth (bundled by default)."""


def _bundled(path, filename):
    return path if path is not None else str(fixture_path(filename))


def _graph_truth(truth_path):
    truth = load_graph(_bundled(truth_path, REFERENCE_GRAPH_FILENAME))
    return GroundTruth.from_artifacts(graph=truth)


def _process_truth(truth_diagram, truth_rules):
    return GroundTruth.from_artifacts(
        model=load_model(_bundled(truth_diagram, REFERENCE_DIAGRAM_FILENAME)),
        rules=load_rules(_bundled(truth_rules, PROCESS_TRUTH_RULES_FILENAME)),
    )


def _graph_reports(extracted, truth):
    graph = load_graph(_bundled(extracted, EXTRACTED_GRAPH_FILENAME))
    return match_graph(graph, _graph_truth(truth))


def _process_reports(extracted, rules, truth_diagram, truth_rules):
    process = load_model(_bundled(extracted, EXTRACTED_DIAGRAM_FILENAME))
    extracted_rules = load_rules(_bundled(rules, EXTRACTED_RULES_FILENAME))
    return match_process(
        process, _process_truth(truth_diagram, truth_rules), extracted_rules
    )


def _query_report(queries, graph_path):
    graph = load_graph(_bundled(graph_path, REFERENCE_GRAPH_FILENAME))
    return score_queries(query_pairs(load_query_cases(queries), graph))


def _emit_reports(ctx, reports):
    _emit(ctx, summarize(reports), reports_to_json(reports))


@evaluate_group.command("graph")
@click.option("--extracted", help="Extracted graph script.")
@click.option("--truth", help="Reference graph script.")
@click.pass_context
def eval_graph(ctx, extracted, truth):
    """Score an extracted knowledge graph."""
    _emit_reports(ctx, _graph_reports(extracted, truth))


@evaluate_group.command("process")
@click.option("--extracted", help="Extracted diagram or model.")
@click.option("--rules", help="Extracted rule file.")
@click.option("--truth-diagram", help="Reference diagram or model.")
@click.option("--truth-rules", help="Reference rule file.")
@click.pass_context
def eval_process(ctx, extracted, rules, truth_diagram, truth_rules):
    """Score an extracted process model and its rules."""
    reports = _process_reports(extracted, rules, truth_diagram, truth_rules)
    _emit_reports(ctx, reports)


@evaluate_group.command("queries")
@click.option("--queries", help="JSON list of evaluation queries.")
@click.option("--graph", "graph_path", help="Reference graph script.")
@click.pass_context
def eval_queries(ctx, queries, graph_path):
    """Score generated queries by result equality with their reference."""
    report = _query_report(queries, graph_path)
    _emit_reports(ctx, [report])
    return EXIT_FINDINGS if report.matched < report.total else EXIT_OK


@evaluate_group.command("all")
@click.pass_context
def eval_all(ctx):
    """Results table over every bundled extraction."""
    reports = (
        _graph_reports(None, None)
        + _process_reports(None, None, None, None)
        + [_query_report(None, None)]
    )
    _emit_reports(ctx, reports)


# ------------------------------- #
#   REPL AND CONFIG               #
# ------------------------------- #


@cli.command()
@click.argument("script")
@click.option("--replay", multiple=True, help="Recorded answers for nl:.")
@click.option("--max-retries", type=int, default=None)
def repl(script, replay, max_retries):
    """Interactive queries against SCRIPT, one per line.

    Lines starting with "nl:" are turned into queries by the model
    endpoint. "quit" or end of input leaves.
    """
    graph = load_graph(script)
    console = Console()
    stdin = click.get_text_stream("stdin")
    interactive = stdin.isatty()
    transport = None

    while True:
        if interactive:
            click.echo("> ", nl=False)
        line = stdin.readline()
        if not line:
            break
        line = line.strip()
        if not line or line.startswith("//"):
            continue
        if line.lower() in QUIT_WORDS:
            break
        try:
            if line.lower().startswith(NL_PREFIX):
                if transport is None:
                    transport, _ = _transport(replay, max_retries)
                parsed = nl_to_query(
                    line[len(NL_PREFIX) :].strip(), graph, transport
                )
            else:
                parsed = parse_query(line, source_name="<repl>")
            result = execute(parsed, graph)
        except Exception as error:
            classified = classify_error(error)
            if classified is None:
                raise
            report_error(classified[0], str(error))
            continue
        console.print(_rich_table(result))
        click.echo(f"{len(result)} rows")
    return EXIT_OK


@cli.command()
@click.option("-s", "--show", is_flag=True)
@click.option("-k", "--key")
@click.option("-v", "--value")
def config(show, key, value):
    """Show or modify the configuration file."""
    if not show and (key is None or value is None):
        raise click.UsageError("use --show, or -k KEY -v VALUE")
    cli_modify_config(key=key, value=value, show=show)
