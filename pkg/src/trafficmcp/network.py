"""Road-network model: grid synthesis, OSM conversion, districts, validation.

Networks are directed graphs with planar coordinates in meters. Junction
control is a per-node flag; saturation flow is stored per edge so the
queue model needs no lane-level geometry.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .errors import invalid_params

EARTH_RADIUS_M = 6371000.0

# veh/s discharged per lane during green (1800 veh/h/lane)
SAT_FLOW_PER_LANE_VPS = 0.5

# Highway classes kept by the OSM converter and their fallback speeds (m/s).
OSM_DEFAULT_SPEEDS = {
    "motorway": 27.8,
    "primary": 16.7,
    "secondary": 13.9,
    "tertiary": 11.1,
    "residential": 8.3,
    "unclassified": 8.3,
}


@dataclass(frozen=True)
class Node:
    id: str
    x: float
    y: float
    signalized: bool = False


@dataclass(frozen=True)
class Edge:
    id: str
    from_node: str
    to_node: str
    length_m: float
    speed_mps: float
    lanes: int = 1
    sat_flow_vps: float = SAT_FLOW_PER_LANE_VPS

    @property
    def freeflow_s(self) -> float:
        return self.length_m / self.speed_mps


@dataclass
class RoadNetwork:
    nodes: list[Node]
    edges: list[Edge]

    @cached_property
    def node_by_id(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def edge_by_id(self) -> dict[str, Edge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def out_edges(self) -> dict[str, list[Edge]]:
        out: dict[str, list[Edge]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            out.setdefault(e.from_node, []).append(e)
        for lst in out.values():
            lst.sort(key=lambda e: e.id)
        return out

    @cached_property
    def in_edges(self) -> dict[str, list[Edge]]:
        inc: dict[str, list[Edge]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            inc.setdefault(e.to_node, []).append(e)
        for lst in inc.values():
            lst.sort(key=lambda e: e.id)
        return inc

    def signalized_nodes(self) -> list[str]:
        return sorted(n.id for n in self.nodes if n.signalized)


@dataclass
class DistrictSet:
    districts: dict[str, list[str]] = field(default_factory=dict)


def generate_grid(rows: int, cols: int, spacing_m: float, speed_mps: float,
                  lanes: int = 1) -> RoadNetwork:
    """Rectangular lattice with bidirectional links between neighbors.

    Interior nodes are signalized, boundary nodes are not. Node ids are
    ``n_<row>_<col>``; edge ids are ``e_<from>_<to>``.
    """
    if rows < 2 or cols < 2:
        raise invalid_params("grid needs rows >= 2 and cols >= 2", param="rows")
    if spacing_m <= 0:
        raise invalid_params("spacing_m must be positive", param="spacing_m")
    if speed_mps <= 0:
        raise invalid_params("speed_mps must be positive", param="speed_mps")
    if lanes < 1:
        raise invalid_params("lanes must be >= 1", param="lanes")

    nodes = []
    for r in range(rows):
        for c in range(cols):
            interior = 0 < r < rows - 1 and 0 < c < cols - 1
            nodes.append(Node(id=f"n_{r}_{c}", x=c * spacing_m, y=r * spacing_m,
                              signalized=interior))

    sat = lanes * SAT_FLOW_PER_LANE_VPS
    edges = []

    def link(a: str, b: str) -> None:
        edges.append(Edge(id=f"e_{a}_{b}", from_node=a, to_node=b,
                          length_m=spacing_m, speed_mps=speed_mps,
                          lanes=lanes, sat_flow_vps=sat))

    for r in range(rows):
        for c in range(cols):
            here = f"n_{r}_{c}"
            if c + 1 < cols:
                right = f"n_{r}_{c + 1}"
                link(here, right)
                link(right, here)
            if r + 1 < rows:
                down = f"n_{r + 1}_{c}"
                link(here, down)
                link(down, here)
    return RoadNetwork(nodes=nodes, edges=edges)


def _parse_maxspeed(raw: str | None, highway: str) -> float:
    if raw:
        text = raw.strip().lower()
        try:
            if text.endswith("mph"):
                return float(text[:-3].strip()) * 0.44704
            if text.endswith("km/h"):
                text = text[:-4].strip()
            return float(text) / 3.6
        except ValueError:
            pass
    return OSM_DEFAULT_SPEEDS[highway]


def convert_osm(document: str) -> RoadNetwork:
    """Build a network from an OSM XML extract.

    Keeps ways whose ``highway`` tag is a known road class, projects
    lat/lon to local planar meters (equirectangular about the bbox
    centroid), and emits one directed edge per consecutive node pair
    (both directions unless ``oneway=yes``). A node becomes signalized
    when it is tagged ``highway=traffic_signals``, is shared by at least
    two kept ways, and has at least three approach arms.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, col = exc.position
        raise invalid_params(f"malformed OSM XML at line {line}, column {col}",
                             param="osm") from exc

    raw_nodes: dict[str, tuple[float, float, dict[str, str]]] = {}
    for el in root.iter("node"):
        tags = {t.get("k"): t.get("v") for t in el.findall("tag")}
        raw_nodes[el.get("id")] = (float(el.get("lat")), float(el.get("lon")), tags)

    ways = []
    for el in root.iter("way"):
        tags = {t.get("k"): t.get("v") for t in el.findall("tag")}
        highway = tags.get("highway")
        if highway not in OSM_DEFAULT_SPEEDS:
            continue
        refs = [nd.get("ref") for nd in el.findall("nd") if nd.get("ref") in raw_nodes]
        if len(refs) < 2:
            continue
        ways.append((refs, highway, tags))
    if not ways:
        raise invalid_params("no usable highway ways in OSM document", param="osm")

    used: set[str] = set()
    way_count: dict[str, int] = {}
    for refs, _, _ in ways:
        used.update(refs)
        for ref in set(refs):
            way_count[ref] = way_count.get(ref, 0) + 1

    lats = [raw_nodes[i][0] for i in used]
    lons = [raw_nodes[i][1] for i in used]
    lat0 = (min(lats) + max(lats)) / 2
    lon0 = (min(lons) + max(lons)) / 2
    k = math.cos(math.radians(lat0))

    def project(lat: float, lon: float) -> tuple[float, float]:
        x = EARTH_RADIUS_M * math.radians(lon - lon0) * k
        y = EARTH_RADIUS_M * math.radians(lat - lat0)
        return x, y

    coords = {i: project(raw_nodes[i][0], raw_nodes[i][1]) for i in used}

    edges: list[Edge] = []
    edge_ids: set[str] = set()
    neighbors: dict[str, set[str]] = {i: set() for i in used}

    def add_edge(a: str, b: str, speed: float, lanes: int) -> None:
        ax, ay = coords[a]
        bx, by = coords[b]
        length = math.hypot(bx - ax, by - ay)
        if length < 0.1:
            return
        base = f"{a}_{b}"
        eid = base
        n = 2
        while eid in edge_ids:
            eid = f"{base}_{n}"
            n += 1
        edge_ids.add(eid)
        edges.append(Edge(id=eid, from_node=a, to_node=b, length_m=length,
                          speed_mps=speed, lanes=lanes,
                          sat_flow_vps=lanes * SAT_FLOW_PER_LANE_VPS))
        neighbors[a].add(b)
        neighbors[b].add(a)

    for refs, highway, tags in ways:
        speed = _parse_maxspeed(tags.get("maxspeed"), highway)
        try:
            lanes = max(1, int(tags.get("lanes", "1")))
        except ValueError:
            lanes = 1
        oneway = tags.get("oneway") == "yes"
        for a, b in zip(refs, refs[1:]):
            add_edge(a, b, speed, lanes)
            if not oneway:
                add_edge(b, a, speed, lanes)

    nodes = []
    for nid in sorted(used):
        lat, lon, tags = raw_nodes[nid]
        x, y = coords[nid]
        signal = (tags.get("highway") == "traffic_signals"
                  and way_count.get(nid, 0) >= 2
                  and len(neighbors[nid]) >= 3)
        nodes.append(Node(id=nid, x=x, y=y, signalized=signal))

    edges.sort(key=lambda e: e.id)
    return RoadNetwork(nodes=nodes, edges=edges)


def define_districts(network: RoadNetwork, assignments: dict[str, list[str]]) -> DistrictSet:
    """Validate a district -> edge-ids mapping against the network."""
    if not assignments:
        raise invalid_params("assignments must be non-empty", param="assignments")
    known = network.edge_by_id
    for district, edge_ids in assignments.items():
        if not edge_ids:
            raise invalid_params(f"district {district!r} has no edges",
                                 param="assignments", district=district)
        for eid in edge_ids:
            if eid not in known:
                raise invalid_params(
                    f"district {district!r} references unknown edge {eid!r}",
                    param="assignments", district=district, edge=eid)
    return DistrictSet(districts={d: list(e) for d, e in assignments.items()})


def strongly_connected_components(network: RoadNetwork) -> list[set[str]]:
    """Tarjan's algorithm, iterative to survive deep graphs."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    components: list[set[str]] = []
    counter = 0

    for root in (n.id for n in network.nodes):
        if root in index:
            continue
        work = [(root, iter(network.out_edges.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for edge in it:
                succ = edge.to_node
                if succ not in index:
                    index[succ] = low[succ] = counter
                    counter += 1
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(network.out_edges.get(succ, ()))))
                    advanced = True
                    break
                if succ in on_stack:
                    low[node] = min(low[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.add(member)
                    if member == node:
                        break
                components.append(comp)
    return components


def validate_network(network: RoadNetwork) -> list[dict]:
    """Diagnostics list; empty means the network is sound."""
    diags: list[dict] = []
    seen_nodes: set[str] = set()
    for n in network.nodes:
        if n.id in seen_nodes:
            diags.append({"kind": "duplicate_node_id", "node": n.id})
        seen_nodes.add(n.id)
        if not (math.isfinite(n.x) and math.isfinite(n.y)):
            diags.append({"kind": "non_finite_coordinate", "node": n.id})

    seen_edges: set[str] = set()
    for e in network.edges:
        if e.id in seen_edges:
            diags.append({"kind": "duplicate_edge_id", "edge": e.id})
        seen_edges.add(e.id)
        for endpoint in (e.from_node, e.to_node):
            if endpoint not in seen_nodes:
                diags.append({"kind": "dangling_endpoint", "edge": e.id, "node": endpoint})
        if e.from_node == e.to_node:
            diags.append({"kind": "self_loop", "edge": e.id})
        if e.length_m <= 0:
            diags.append({"kind": "non_positive_length", "edge": e.id})
        if e.speed_mps <= 0:
            diags.append({"kind": "non_positive_speed", "edge": e.id})
        if e.sat_flow_vps <= 0:
            diags.append({"kind": "non_positive_sat_flow", "edge": e.id})

    incoming: dict[str, int] = {}
    for e in network.edges:
        incoming[e.to_node] = incoming.get(e.to_node, 0) + 1
    for n in network.nodes:
        if n.signalized and incoming.get(n.id, 0) < 2:
            diags.append({"kind": "signalized_underconnected", "node": n.id})

    if network.nodes and not any(d["kind"] == "dangling_endpoint" for d in diags):
        comps = strongly_connected_components(network)
        comps.sort(key=lambda c: (-len(c), min(c)))
        largest = comps[0]
        # reachability from the largest component
        reached = set(largest)
        frontier = list(largest)
        while frontier:
            node = frontier.pop()
            for edge in network.out_edges.get(node, ()):
                if edge.to_node not in reached:
                    reached.add(edge.to_node)
                    frontier.append(edge.to_node)
        for n in network.nodes:
            if n.id not in reached:
                diags.append({"kind": "unreachable_from_core", "node": n.id})
    return diags


def network_to_dict(network: RoadNetwork) -> dict:
    return {
        "nodes": [{"id": n.id, "x": n.x, "y": n.y, "signalized": n.signalized}
                  for n in network.nodes],
        "edges": [{"id": e.id, "from": e.from_node, "to": e.to_node,
                   "length_m": e.length_m, "speed_mps": e.speed_mps,
                   "lanes": e.lanes, "sat_flow_vps": e.sat_flow_vps}
                  for e in network.edges],
    }


def network_from_dict(payload: dict) -> RoadNetwork:
    try:
        nodes = [Node(id=n["id"], x=float(n["x"]), y=float(n["y"]),
                      signalized=bool(n["signalized"]))
                 for n in payload["nodes"]]
        edges = [Edge(id=e["id"], from_node=e["from"], to_node=e["to"],
                      length_m=float(e["length_m"]), speed_mps=float(e["speed_mps"]),
                      lanes=int(e["lanes"]), sat_flow_vps=float(e["sat_flow_vps"]))
                 for e in payload["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise invalid_params(f"bad network payload: {exc}", param="network") from exc
    return RoadNetwork(nodes=nodes, edges=edges)


def write_network(network: RoadNetwork, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(network_to_dict(network), indent=2) + "\n",
                    encoding="utf-8")
    return path


def read_network(path: str | Path) -> RoadNetwork:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise invalid_params(f"network file {path} is not valid JSON: {exc}",
                             param="network") from exc
    return network_from_dict(payload)


def write_districts(districts: DistrictSet, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps({"districts": districts.districts}, indent=2) + "\n",
                    encoding="utf-8")
    return path


def read_districts(path: str | Path) -> DistrictSet:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return DistrictSet(districts={d: list(e) for d, e in payload["districts"].items()})
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise invalid_params(f"district file {path} is malformed: {exc}",
                             param="districts") from exc
