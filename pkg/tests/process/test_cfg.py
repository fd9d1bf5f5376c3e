import random
from collections import deque

import networkx as nx
import pytest

from riscv_supplychain.cfg import (
    Cfg,
    build_cfg,
    enumerate_paths,
    fork_branch_chains,
    fork_branch_membership,
    reachable_without,
    shortest_path_without,
)
from riscv_supplychain.diagram import parse_activity_diagram
from riscv_supplychain.exceptions import GraphError
from riscv_supplychain.process_model import lower_to_model


@pytest.fixture(scope="module")
def cfg(reference_model):
    return build_cfg(reference_model)


def test_label_lookup_is_normalized(cfg):
    assert cfg.nodes_for("  compliance   VERIFIED ") == {"n6"}
    assert cfg.nodes_for("Ghost Activity") == frozenset()


def test_adjacency_follows_edge_order(cfg):
    assert cfg.adjacency["n6"] == ["n4", "n7"]
    assert cfg.guarded_targets("n6") == [("no", "n4"), ("yes", "n7")]


def test_reachable_without(cfg):
    everything = reachable_without(cfg, set(), cfg.start)
    assert len(everything) == 15
    assert reachable_without(cfg, {"n4"}, "n1") == {"n1", "n2", "n3"}
    # Blocking one fork branch leaves the other open to the join.
    assert "n14" in reachable_without(cfg, {"n11"}, "n1")
    assert "n12" not in reachable_without(cfg, {"n11"}, "n1")


def test_reachable_without_rejects_bad_input(cfg):
    with pytest.raises(ValueError):
        reachable_without(cfg, {"n1"}, "n1")
    with pytest.raises(GraphError):
        reachable_without(cfg, {"n99"}, "n1")
    with pytest.raises(GraphError):
        reachable_without(cfg, set(), "n99")


def test_shortest_path_without(cfg):
    assert shortest_path_without(cfg, {"n9"}, "n1", "n15") == [
        "n1",
        "n2",
        "n3",
        "n4",
        "n5",
        "n6",
        "n7",
        "n8",
        "n13",
        "n14",
        "n15",
    ]
    assert shortest_path_without(cfg, {"n7"}, "n1", "n15") is None


@pytest.mark.parametrize("budget, total", [(1, 3), (2, 5), (3, 7)])
def test_enumerate_paths(cfg, budget, total):
    paths = enumerate_paths(cfg, budget)
    assert len(paths) == total
    truncated = [p for p in paths if p.truncated]
    assert len(truncated) == 1
    assert all(p.nodes[-1] == "n15" for p in paths if not p.truncated)
    assert all(p.nodes[0] == "n1" for p in paths)


def test_enumerate_paths_needs_positive_budget(cfg):
    with pytest.raises(ValueError):
        enumerate_paths(cfg, 0)


def test_fork_membership(cfg):
    membership = fork_branch_membership(cfg)
    assert membership == {
        "n9": ("n8", 0),
        "n10": ("n8", 0),
        "n11": ("n8", 0),
        "n12": ("n8", 0),
        "n13": ("n8", 1),
    }


def test_nested_fork_chains():
    model = lower_to_model(
        parse_activity_diagram(
            "@startuml\n"
            "start\n"
            "fork\n"
            "  :A;\n"
            "  fork\n"
            "    :B;\n"
            "  fork again\n"
            "    :C;\n"
            "  end fork\n"
            "fork again\n"
            "  :D;\n"
            "end fork\n"
            "stop\n"
            "@enduml\n"
        )
    )
    chains = fork_branch_chains(build_cfg(model))
    assert chains["n5"] == [("n2", 0), ("n4", 0)]
    assert chains["n6"] == [("n2", 0), ("n4", 1)]
    assert chains["n8"] == [("n2", 1)]
    assert "n1" not in chains


def cfg_of(text):
    return build_cfg(lower_to_model(parse_activity_diagram(text)))


def test_diamond_has_two_paths():
    cfg = cfg_of(
        "@startuml\n"
        "start\n"
        "if (Ready?) then (yes)\n"
        "  :A;\n"
        "else (no)\n"
        "  :B;\n"
        "endif\n"
        "stop\n"
        "@enduml\n"
    )
    paths = enumerate_paths(cfg, 1)
    assert len(paths) == 2
    assert not any(p.truncated for p in paths)
    assert {cfg.label(p.nodes[2]) for p in paths} == {"A", "B"}


def test_chain_has_one_path():
    cfg = cfg_of("@startuml\nstart\n:A;\n:B;\nstop\n@enduml\n")
    (path,) = enumerate_paths(cfg, 1)
    assert path.nodes == ("n1", "n2", "n3", "n4")
    assert not path.truncated


def plain_reach(successors, blocked, source):
    seen = {source}
    queue = deque([source])
    while queue:
        for target in successors[queue.popleft()]:
            if target not in blocked and target not in seen:
                seen.add(target)
                queue.append(target)
    return seen


def random_cfg(rng):
    size = rng.randint(1, 8)
    graph = nx.MultiDiGraph()
    graph.add_nodes_from(
        (f"n{i}", {"kind": "activity", "label": "", "lane": None})
        for i in range(1, size + 1)
    )
    for _ in range(rng.randint(0, 2 * size)):
        graph.add_edge(
            f"n{rng.randint(1, size)}", f"n{rng.randint(1, size)}"
        )
    return Cfg(model=None, graph=graph, start="n1")


def test_reachable_without_matches_plain_search():
    rng = random.Random(1234)
    for _ in range(1000):
        cfg = random_cfg(rng)
        nodes = sorted(cfg.graph.nodes)
        source = rng.choice(nodes)
        blocked = {
            n for n in nodes if n != source and rng.random() < 0.3
        }
        expected = plain_reach(cfg.adjacency, blocked, source)
        assert reachable_without(cfg, blocked, source) == expected
        target = rng.choice(nodes)
        path = shortest_path_without(cfg, blocked, source, target)
        if target in blocked or target not in expected:
            assert path is None
        else:
            assert path[0] == source and path[-1] == target
            assert not set(path) & blocked
            assert all(cfg.has_edge(a, b) for a, b in zip(path, path[1:]))
