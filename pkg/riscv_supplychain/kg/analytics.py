"""Supply-chain analytics over a property graph: bottlenecks (cut
vertices and bridge relationships), key participants by degree, and path
tracing between entities.
"""

import networkx as nx

from riscv_supplychain.descriptors import MAX_TRACE_LENGTH
from riscv_supplychain.exceptions import GraphError
from riscv_supplychain.utils import natural_key


def undirected_projection(graph):
    """Simple undirected graph over all nodes; self-loops dropped."""
    projection = nx.Graph()
    projection.add_nodes_from(graph.node_ids())
    projection.add_edges_from(
        (rel.source, rel.target)
        for rel in graph.rels
        if rel.source != rel.target
    )
    return projection


def articulation_points(graph):
    """Nodes whose removal increases the number of connected components
    of the undirected projection.

    Returns
    -------
    set of str
    """
    return set(nx.articulation_points(undirected_projection(graph)))


def bridges(graph):
    """Relationships whose removal disconnects their endpoints in the
    undirected projection. Parallel relationships are never bridges.

    Returns
    -------
    list of str
        Relationship ids in natural order.
    """
    multigraph = nx.MultiGraph()
    multigraph.add_nodes_from(graph.node_ids())
    for rel in graph.rels:
        if rel.source != rel.target:
            multigraph.add_edge(rel.source, rel.target, key=rel.id)

    found = []
    for u, v in nx.bridges(multigraph):
        found.extend(multigraph[u][v])
    return sorted(found, key=natural_key)


def degree_centrality(graph, k):
    """Top-``k`` nodes by total degree (in + out), ties broken by node id.

    Parameters
    ----------
    graph : PropertyGraph
    k : int
        At least 1.

    Returns
    -------
    list of (str, int)
    """
    if k < 1:
        raise GraphError(f"k must be >= 1, not {k}")
    degree = {node_id: 0 for node_id in graph.nodes}
    for rel in graph.rels:
        degree[rel.source] += 1
        degree[rel.target] += 1
    ranked = sorted(
        degree.items(), key=lambda item: (-item[1], natural_key(item[0]))
    )
    return ranked[:k]


def trace_paths(graph, src, dst, max_len):
    """All simple directed paths from ``src`` to ``dst`` with at most
    ``max_len`` relationships, in lexicographic order of node ids.

    A node is not traced to itself: ``src == dst`` gives no paths.
    """
    for end in (src, dst):
        if end not in graph.nodes:
            raise GraphError(f"unknown node '{end}'")
    if not 1 <= max_len <= MAX_TRACE_LENGTH:
        raise GraphError(
            f"max_len must be between 1 and {MAX_TRACE_LENGTH}, "
            f"not {max_len}"
        )
    if src == dst:
        return []

    projection = nx.DiGraph()
    projection.add_nodes_from(graph.node_ids())
    projection.add_edges_from((rel.source, rel.target) for rel in graph.rels)
    paths = nx.all_simple_paths(projection, src, dst, cutoff=max_len)
    return sorted(
        (list(p) for p in paths),
        key=lambda path: [natural_key(node) for node in path],
    )


def graph_schema(graph):
    """Text description of the labels, relationship types, property keys
    and observed connection patterns of a graph. Fills the schema slot of
    query-generation prompts.
    """
    labels = sorted({lbl for n in graph.nodes.values() for lbl in n.labels})
    types = sorted({rel.type for rel in graph.rels})
    node_keys = sorted({k for n in graph.nodes.values() for k in n.props})
    rel_keys = sorted({k for rel in graph.rels for k in rel.props})

    patterns = set()
    for rel in graph.rels:
        for source in graph.nodes[rel.source].labels or ("",):
            for target in graph.nodes[rel.target].labels or ("",):
                patterns.add(f"(:{source})-[:{rel.type}]->(:{target})")

    lines = [
        f"Node labels: {', '.join(labels) or '(none)'}",
        f"Relationship types: {', '.join(types) or '(none)'}",
        f"Node properties: {', '.join(node_keys) or '(none)'}",
        f"Relationship properties: {', '.join(rel_keys) or '(none)'}",
        "Patterns:",
    ]
    lines.extend(f"  {p}" for p in sorted(patterns))
    return "\n".join(lines) + "\n"
