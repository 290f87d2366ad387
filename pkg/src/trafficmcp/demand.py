"""Demand generation and routing: random trips, OD expansion, shortest
paths, and turn-ratio walks.

All generators are pure functions of their inputs and a seed; each draws
from its own sub-stream (see rng.py) so adding a generator never changes
another's output.
"""

from __future__ import annotations

import csv
import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ToolError, invalid_params
from .network import DistrictSet, RoadNetwork
from .rng import stream

RANDOM_TRIP_RETRY_FACTOR = 10
TURN_WALK_MAX_HOPS = 100


@dataclass(frozen=True)
class Trip:
    id: str
    depart_s: float
    from_edge: str
    to_edge: str


@dataclass
class TripTable:
    trips: list[Trip] = field(default_factory=list)


@dataclass(frozen=True)
class ODCell:
    origin: str
    destination: str
    vehicles: int
    begin_s: float
    end_s: float


@dataclass
class ODMatrix:
    cells: list[ODCell] = field(default_factory=list)


@dataclass
class RoutePlan:
    routes: dict[str, list[str]] = field(default_factory=dict)


def _sorted_table(trips: list[Trip]) -> TripTable:
    order = {t.id: i for i, t in enumerate(trips)}
    return TripTable(trips=sorted(trips, key=lambda t: (t.depart_s, order[t.id])))


# ---------------------------------------------------------------------------
# shortest paths

def shortest_path_costs(network: RoadNetwork, source: str) -> dict[str, float]:
    """Dijkstra over nodes with free-flow edge times as costs."""
    dist = {source: 0.0}
    heap = [(0.0, source)]
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist.get(node, math.inf):
            continue
        for edge in network.out_edges.get(node, ()):
            nd = d + edge.freeflow_s
            if nd < dist.get(edge.to_node, math.inf):
                dist[edge.to_node] = nd
                heapq.heappush(heap, (nd, edge.to_node))
    return dist


def _reverse_costs(network: RoadNetwork, target: str) -> dict[str, float]:
    dist = {target: 0.0}
    heap = [(0.0, target)]
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist.get(node, math.inf):
            continue
        for edge in network.in_edges.get(node, ()):
            nd = d + edge.freeflow_s
            if nd < dist.get(edge.from_node, math.inf):
                dist[edge.from_node] = nd
                heapq.heappush(heap, (nd, edge.from_node))
    return dist


def shortest_edge_path(network: RoadNetwork, source: str, target: str) -> list[str] | None:
    """Minimum free-flow-time node-to-node path as an edge-id sequence.

    Among equal-cost paths, returns the lexicographically smallest edge-id
    sequence: after forward and backward Dijkstra passes, the path is
    rebuilt greedily, always taking the smallest edge id that stays on an
    optimal path.
    """
    if source == target:
        return []
    forward = shortest_path_costs(network, source)
    if target not in forward:
        return None
    backward = _reverse_costs(network, target)
    total = forward[target]
    eps = 1e-9 * max(1.0, total)

    path: list[str] = []
    node = source
    remaining = total
    while node != target:
        best = None
        for edge in network.out_edges.get(node, ()):  # sorted by edge id
            tail = backward.get(edge.to_node)
            if tail is None:
                continue
            if abs(edge.freeflow_s + tail - remaining) <= eps:
                best = edge
                break
        if best is None:  # numerical dead end; fall back to strict argmin
            best = min(
                (e for e in network.out_edges.get(node, ())
                 if e.to_node in backward),
                key=lambda e: (e.freeflow_s + backward[e.to_node], e.id),
            )
        path.append(best.id)
        remaining -= best.freeflow_s
        node = best.to_node
        if len(path) > len(network.edges) + 1:
            return None
    return path


def route_trips(network: RoadNetwork, trips: TripTable) -> tuple[RoutePlan, list[dict]]:
    """Resolve each trip to its cheapest edge sequence.

    The route is from-edge + shortest path + to-edge; trips with no path
    are reported in the failure list and omitted from the plan.
    """
    plan = RoutePlan()
    failures: list[dict] = []
    edge_by_id = network.edge_by_id
    cache: dict[tuple[str, str], list[str] | None] = {}
    for trip in trips.trips:
        if trip.from_edge not in edge_by_id or trip.to_edge not in edge_by_id:
            failures.append({"trip": trip.id, "reason": "unknown edge"})
            continue
        src = edge_by_id[trip.from_edge].to_node
        dst = edge_by_id[trip.to_edge].from_node
        key = (src, dst)
        if key not in cache:
            cache[key] = shortest_edge_path(network, src, dst)
        mid = cache[key]
        if mid is None:
            failures.append({"trip": trip.id, "reason": "no path",
                             "from": trip.from_edge, "to": trip.to_edge})
            continue
        plan.routes[trip.id] = [trip.from_edge, *mid, trip.to_edge]
    return plan, failures


def route_cost(network: RoadNetwork, route: list[str]) -> float:
    return sum(network.edge_by_id[eid].freeflow_s for eid in route)


# ---------------------------------------------------------------------------
# generators

def _connectivity(network: RoadNetwork) -> dict[str, set[str]]:
    """Reachable node sets, computed lazily per source node."""

    class Lazy(dict):
        def __missing__(self, source: str) -> set[str]:
            reached = {source}
            frontier = [source]
            while frontier:
                node = frontier.pop()
                for edge in network.out_edges.get(node, ()):
                    if edge.to_node not in reached:
                        reached.add(edge.to_node)
                        frontier.append(edge.to_node)
            self[source] = reached
            return reached

    return Lazy()


def random_trips(network: RoadNetwork, count: int, seed: int,
                 begin_s: float, end_s: float) -> TripTable:
    """Uniform random demand; origins and destinations weighted by edge length.

    Pairs with no connecting path are redrawn, up to 10x count attempts in
    total. Output is fully determined by the seed.
    """
    if count <= 0:
        raise invalid_params("count must be positive", param="count")
    if end_s <= begin_s:
        raise invalid_params("end_s must exceed begin_s", param="end_s")
    if len(network.edges) < 2:
        raise invalid_params("network needs at least 2 edges", param="network")

    rng = stream(seed, "random_trips")
    edges = sorted(network.edges, key=lambda e: e.id)
    weights = [e.length_m for e in edges]
    reachable = _connectivity(network)

    trips: list[Trip] = []
    budget = RANDOM_TRIP_RETRY_FACTOR * count
    attempts = 0
    failed_pairs: list[tuple[str, str]] = []
    while len(trips) < count:
        if attempts >= budget:
            raise ToolError(
                "could not draw routable origin/destination pairs; "
                f"sample of unroutable pairs: {failed_pairs[:5]}",
                retryable=False, unroutable=failed_pairs[:5])
        attempts += 1
        origin = edges[rng.weighted_index(weights)]
        dest = edges[rng.weighted_index(weights)]
        if origin.id == dest.id:
            failed_pairs.append((origin.id, dest.id))
            continue
        if dest.from_node not in reachable[origin.to_node]:
            failed_pairs.append((origin.id, dest.id))
            continue
        depart = rng.uniform(begin_s, end_s)
        trips.append(Trip(id=f"t{len(trips)}", depart_s=depart,
                          from_edge=origin.id, to_edge=dest.id))
    return _sorted_table(trips)


def od_to_trips(od: ODMatrix, districts: DistrictSet, seed: int) -> TripTable:
    """Expand an OD matrix into individual trips.

    Each cell emits exactly its vehicle count; origin and destination
    edges are drawn uniformly from the district's edge lists.
    """
    rng = stream(seed, "od_to_trips")
    trips: list[Trip] = []
    for idx, cell in enumerate(od.cells):
        for side, name in (("origin", cell.origin), ("destination", cell.destination)):
            if name not in districts.districts:
                raise invalid_params(
                    f"cell {idx}: unknown {side} district {name!r}",
                    param="od", cell=idx, district=name)
        if cell.begin_s >= cell.end_s:
            raise invalid_params(f"cell {idx}: begin_s must precede end_s",
                                 param="od", cell=idx)
        if cell.vehicles < 0:
            raise invalid_params(f"cell {idx}: negative vehicle count",
                                 param="od", cell=idx)
        origins = districts.districts[cell.origin]
        dests = districts.districts[cell.destination]
        for k in range(cell.vehicles):
            from_edge = rng.choice(origins)
            to_edge = rng.choice(dests)
            if to_edge == from_edge:
                alternatives = [e for e in dests if e != from_edge]
                if not alternatives:
                    raise invalid_params(
                        f"cell {idx}: districts share the single edge {from_edge!r}",
                        param="od", cell=idx)
                to_edge = rng.choice(alternatives)
            depart = rng.uniform(cell.begin_s, cell.end_s)
            trips.append(Trip(id=f"od{idx}_{k}", depart_s=depart,
                              from_edge=from_edge, to_edge=to_edge))
    return _sorted_table(trips)


def turn_ratio_routes(network: RoadNetwork, ratios: dict[str, dict[str, float]],
                      inflows: dict[str, int], seed: int,
                      begin_s: float, end_s: float) -> tuple[TripTable, RoutePlan]:
    """Inject vehicles at source edges and walk them through turn ratios.

    A walk ends at an edge with no outgoing ratios (a network exit) or
    after 100 hops. Every ratio row must sum to 1.
    """
    if end_s <= begin_s:
        raise invalid_params("end_s must exceed begin_s", param="end_s")
    edge_by_id = network.edge_by_id
    for incoming, row in ratios.items():
        if incoming not in edge_by_id:
            raise invalid_params(f"unknown incoming edge {incoming!r}",
                                 param="ratios", edge=incoming)
        total = sum(row.values())
        if abs(total - 1.0) > 1e-9:
            raise invalid_params(
                f"turn ratios for edge {incoming!r} sum to {total}, expected 1",
                param="ratios", edge=incoming)
        for out in row:
            if out not in edge_by_id:
                raise invalid_params(f"unknown outgoing edge {out!r}",
                                     param="ratios", edge=out)

    rng = stream(seed, "turn_ratio_routes")
    trips: list[Trip] = []
    plan = RoutePlan()
    for source in sorted(inflows):
        if source not in edge_by_id:
            raise invalid_params(f"unknown source edge {source!r}",
                                 param="inflows", edge=source)
        for k in range(inflows[source]):
            route = [source]
            current = source
            for _ in range(TURN_WALK_MAX_HOPS):
                row = ratios.get(current)
                if not row:
                    break
                outs = sorted(row)
                current = outs[rng.weighted_index([row[o] for o in outs])]
                route.append(current)
            tid = f"tr_{source}_{k}"
            trips.append(Trip(id=tid, depart_s=rng.uniform(begin_s, end_s),
                              from_edge=source, to_edge=route[-1]))
            plan.routes[tid] = route
    return _sorted_table(trips), plan


# ---------------------------------------------------------------------------
# file formats

OD_CSV_HEADER = ["origin", "destination", "vehicles", "begin_s", "end_s"]


def write_od_csv(od: ODMatrix, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(OD_CSV_HEADER)
        for cell in od.cells:
            writer.writerow([cell.origin, cell.destination, cell.vehicles,
                             cell.begin_s, cell.end_s])
    return path


def read_od_csv(path: str | Path) -> ODMatrix:
    path = Path(path)
    cells = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != OD_CSV_HEADER:
            raise invalid_params(
                f"OD CSV {path} must start with header {','.join(OD_CSV_HEADER)}",
                param="od")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                cells.append(ODCell(origin=row[0], destination=row[1],
                                    vehicles=int(row[2]), begin_s=float(row[3]),
                                    end_s=float(row[4])))
            except (IndexError, ValueError) as exc:
                raise invalid_params(f"OD CSV {path} row {lineno}: {exc}",
                                     param="od", row=lineno) from exc
    return ODMatrix(cells=cells)


def write_trips(table: TripTable, path: str | Path) -> Path:
    path = Path(path)
    payload = {"trips": [{"id": t.id, "depart_s": t.depart_s,
                          "from": t.from_edge, "to": t.to_edge}
                         for t in table.trips]}
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def read_trips(path: str | Path) -> TripTable:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        trips = [Trip(id=t["id"], depart_s=float(t["depart_s"]),
                      from_edge=t["from"], to_edge=t["to"])
                 for t in payload["trips"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise invalid_params(f"trips file {path} is malformed: {exc}",
                             param="trips") from exc
    return TripTable(trips=trips)


def write_routes(plan: RoutePlan, path: str | Path) -> Path:
    path = Path(path)
    payload = {"routes": {tid: list(edges) for tid, edges in plan.routes.items()}}
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def read_routes(path: str | Path) -> RoutePlan:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        routes = {tid: list(edges) for tid, edges in payload["routes"].items()}
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise invalid_params(f"routes file {path} is malformed: {exc}",
                             param="routes") from exc
    return RoutePlan(routes=routes)
