from collections import UserDict
from dataclasses import dataclass, field

import networkx as nx

from riscv_supplychain.descriptors import NAME_PROPERTY
from riscv_supplychain.exceptions import GraphError
from riscv_supplychain.utils import natural_key


@dataclass
class GraphNode:
    id: str
    labels: tuple = ()
    props: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.props.get(NAME_PROPERTY)


@dataclass
class Relationship:
    id: str
    type: str
    source: str
    target: str
    props: dict = field(default_factory=dict)


class NodesDict(UserDict):
    """Graph nodes indexed by id, with lookup by name as a fallback."""

    def find(self, key):
        """Node by id or, failing that, by its ``name`` property."""
        if key in self.data:
            return self.data[key]
        named = [n for n in self.data.values() if n.name == key]
        if len(named) == 1:
            return named[0]
        if named:
            raise GraphError(f"name '{key}' is shared by several nodes")
        raise GraphError(f"unknown node '{key}'")


class PropertyGraph:
    """In-memory property graph.

    Nodes are keyed by id; relationships are kept in creation order and
    carry ids r1..rM.
    """

    def __init__(self):
        self.nodes = NodesDict()
        self.rels = []

    def add_node(self, node_id, labels=(), props=None):
        if node_id in self.nodes:
            raise GraphError(f"duplicate node id '{node_id}'")
        labels = tuple(dict.fromkeys(labels))
        if any(not label for label in labels):
            raise GraphError("node labels must not be empty")
        node = GraphNode(node_id, labels, dict(props or {}))
        self.nodes[node_id] = node
        return node

    def add_relationship(self, rel_type, source, target, props=None):
        if not rel_type:
            raise GraphError("relationship type must not be empty")
        for end in (source, target):
            if end not in self.nodes:
                raise GraphError(f"relationship endpoint '{end}' not found")
        rel_id = f"r{len(self.rels) + 1}"
        rel = Relationship(rel_id, rel_type, source, target, dict(props or {}))
        self.rels.append(rel)
        return rel

    def find_node(self, labels, props):
        """First node (in id order) with exactly these labels and
        properties, or None."""
        wanted = set(labels)
        for node_id in self.node_ids():
            node = self.nodes[node_id]
            if set(node.labels) == wanted and node.props == props:
                return node
        return None

    def find_relationship(self, rel_type, source, target, props):
        for rel in self.rels:
            if (rel.type, rel.source, rel.target, rel.props) == (
                rel_type,
                source,
                target,
                props,
            ):
                return rel
        return None

    def node_ids(self):
        return sorted(self.nodes, key=natural_key)

    def out_rels(self, node_id):
        return [r for r in self.rels if r.source == node_id]

    def in_rels(self, node_id):
        return [r for r in self.rels if r.target == node_id]

    @property
    def attribute_count(self):
        """Node properties other than the primary name."""
        return sum(
            sum(1 for key in node.props if key != NAME_PROPERTY)
            for node in self.nodes.values()
        )

    def to_networkx(self):
        """Directed multigraph projection keyed by relationship id."""
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.node_ids())
        for rel in self.rels:
            graph.add_edge(rel.source, rel.target, key=rel.id, type=rel.type)
        return graph

    def __len__(self):
        return len(self.nodes)

    def __repr__(self):
        return (
            f"PropertyGraph({len(self.nodes)} nodes, "
            f"{len(self.rels)} relationships, "
            f"{self.attribute_count} attributes)"
        )
