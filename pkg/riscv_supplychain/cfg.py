"""Control-flow graph of a process model and the analysis primitives the
rule engine is built on.
"""

from collections import defaultdict
from dataclasses import dataclass, field

import networkx as nx

from riscv_supplychain.descriptors import LABELLED_KINDS
from riscv_supplychain.exceptions import GraphError
from riscv_supplychain.process_model import matching_joins, validate_model
from riscv_supplychain.utils import normalize_label


@dataclass
class Cfg:
    """Analysis view of a ProcessModel.

    Parameters
    ----------
    model : ProcessModel
    graph : networkx.MultiDiGraph
        One edge per model edge, keyed in model edge order; edge data
        holds the guard.
    start : str
        Id of the start node.
    label_index : dict
        Normalized activity/decision label -> frozenset of node ids.
    """

    model: object
    graph: nx.MultiDiGraph
    start: str
    label_index: dict = field(default_factory=dict)

    @property
    def adjacency(self):
        """Node id -> successor ids, one entry per edge, in edge order."""
        return {
            node: [target for _, target in self.graph.out_edges(node)]
            for node in self.graph.nodes
        }

    def nodes_for(self, label):
        """L(x): node ids whose normalized label equals ``label``."""
        return self.label_index.get(normalize_label(label), frozenset())

    def kind(self, node_id):
        return self.graph.nodes[node_id]["kind"]

    def lane(self, node_id):
        return self.graph.nodes[node_id]["lane"]

    def label(self, node_id):
        return self.graph.nodes[node_id]["label"]

    def guarded_targets(self, node_id):
        """(guard, target) pairs of a node's out-edges, in edge order."""
        return [
            (data.get("guard"), target)
            for _, target, data in self.graph.out_edges(node_id, data=True)
        ]

    def has_edge(self, source, target):
        return self.graph.has_edge(source, target)


def build_cfg(model, validate=True):
    """Build the control-flow graph of a process model.

    Parameters
    ----------
    model : ProcessModel
    validate : bool
        Check the model invariants first (default True). Analysis of
        arbitrary digraphs passes False.

    Returns
    -------
    Cfg
    """
    if validate:
        validate_model(model)

    graph = nx.MultiDiGraph()
    label_index = defaultdict(set)
    for node in model.nodes:
        graph.add_node(
            node.id, kind=node.kind, label=node.label, lane=node.lane
        )
        if node.kind in LABELLED_KINDS:
            label_index[normalize_label(node.label)].add(node.id)
    for edge in model.edges:
        graph.add_edge(edge.source, edge.target, guard=edge.guard)

    return Cfg(
        model=model,
        graph=graph,
        start=model.start,
        label_index={k: frozenset(v) for k, v in label_index.items()},
    )


def reachable_without(cfg, blocked, source):
    """Nodes reachable from ``source`` along edges whose endpoints avoid
    ``blocked``.

    Parameters
    ----------
    cfg : Cfg
    blocked : set of str
    source : str
        Must not be in ``blocked``.

    Returns
    -------
    set of str
        Includes ``source`` itself.
    """
    if source not in cfg.graph:
        raise GraphError(f"unknown node id {source}")
    unknown = set(blocked) - set(cfg.graph.nodes)
    if unknown:
        raise GraphError(f"unknown node ids {sorted(unknown)}")
    if source in blocked:
        raise ValueError(f"source {source} is blocked")

    allowed = cfg.graph.subgraph(set(cfg.graph.nodes) - set(blocked))
    return {source} | nx.descendants(allowed, source)


def shortest_path_without(cfg, blocked, source, target):
    """A shortest node path from ``source`` to ``target`` avoiding
    ``blocked``, or None.
    """
    allowed = cfg.graph.subgraph(set(cfg.graph.nodes) - set(blocked))
    try:
        return nx.shortest_path(allowed, source, target)
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        return None


@dataclass(frozen=True)
class EnumeratedPath:
    nodes: tuple
    truncated: bool


def enumerate_paths(cfg, edge_budget):
    """All maximal paths from start in which no edge is traversed more
    than ``edge_budget`` times.

    Parameters
    ----------
    cfg : Cfg
    edge_budget : int
        Positive traversal budget per edge.

    Returns
    -------
    list of EnumeratedPath
        A path is truncated when its last node still has out-edges but
        every one of them has exhausted its budget; otherwise it ended at
        a stop (or dead-end) node.
    """
    if edge_budget < 1:
        raise ValueError(f"edge budget must be >= 1, not {edge_budget}")

    out = {
        node: list(cfg.graph.out_edges(node, keys=True))
        for node in cfg.graph.nodes
    }
    used = defaultdict(int)
    paths = []
    path = [cfg.start]

    def extend(node):
        candidates = [e for e in out[node] if used[e] < edge_budget]
        if not candidates:
            paths.append(
                EnumeratedPath(nodes=tuple(path), truncated=bool(out[node]))
            )
            return
        for edge in candidates:
            used[edge] += 1
            path.append(edge[1])
            extend(edge[1])
            path.pop()
            used[edge] -= 1

    extend(cfg.start)
    return paths


def fork_branch_chains(cfg):
    """Every fork/branch a node lies in, outermost first.

    Returns
    -------
    dict
        node id -> list of (fork id, branch index).
    """
    simple = nx.DiGraph(cfg.graph)
    joins = matching_joins(cfg.model, simple)

    regions = []
    for fork, join in joins.items():
        heads = [target for _, target in cfg.graph.out_edges(fork)]
        closed = simple.subgraph(set(simple.nodes) - {fork, join})
        branch_of = {}
        for index, head in enumerate(heads):
            if head in (fork, join):
                continue
            for node in {head} | nx.descendants(closed, head):
                branch_of.setdefault(node, index)
        regions.append((fork, branch_of))

    # Larger regions are outer forks.
    regions.sort(key=lambda region: (-len(region[1]), region[0]))
    chains = defaultdict(list)
    for fork, branch_of in regions:
        for node, index in branch_of.items():
            chains[node].append((fork, index))
    return dict(chains)


def fork_branch_membership(cfg):
    """Innermost (fork id, branch index) of each node inside a fork
    branch. Nodes outside forks are absent from the map.
    """
    chains = fork_branch_chains(cfg)
    return {node: chain[-1] for node, chain in chains.items()}
