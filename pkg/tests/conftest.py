import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import pytest

from trafficmcp.network import Edge, Node, RoadNetwork
from trafficmcp.rng import Stream


def brute_force_routes(network, source, target):
    """All simple node paths from source to target, as edge-id sequences.

    Enumerates every acyclic alternative, so it is only usable on tiny
    networks; serves as the independent routing oracle.
    """
    results = []

    def walk(node, visited, edges_so_far):
        if node == target:
            results.append(list(edges_so_far))
            return
        for edge in network.out_edges.get(node, ()):
            if edge.to_node in visited:
                continue
            visited.add(edge.to_node)
            edges_so_far.append(edge.id)
            walk(edge.to_node, visited, edges_so_far)
            edges_so_far.pop()
            visited.discard(edge.to_node)

    walk(source, {source}, [])
    return results


def random_network(seed, max_nodes=6):
    """Small random directed network with integer lengths and unit speeds.

    Unit speeds keep path costs exactly representable, so equal-cost ties
    are genuine ties rather than float accidents.
    """
    rng = Stream(seed)
    n = 2 + rng.randrange(max_nodes - 1)
    nodes = [Node(id=f"v{i}", x=float(i), y=0.0) for i in range(n)]
    edges = []
    seen = set()
    target_edges = n + rng.randrange(2 * n)
    attempts = 0
    while len(edges) < target_edges and attempts < 10 * target_edges:
        attempts += 1
        a = rng.randrange(n)
        b = rng.randrange(n)
        if a == b or (a, b) in seen:
            continue
        seen.add((a, b))
        length = float(1 + rng.randrange(9))
        edges.append(Edge(id=f"g{a}_{b}", from_node=f"v{a}", to_node=f"v{b}",
                          length_m=length, speed_mps=1.0))
    return RoadNetwork(nodes=nodes, edges=edges)


@pytest.fixture
def grid3():
    from trafficmcp.network import generate_grid

    return generate_grid(3, 3, 200.0, 13.9)
