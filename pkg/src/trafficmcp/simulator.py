"""Deterministic discrete-time point-queue traffic simulator.

Semantics, fixed so runs are reproducible and hand-traceable:

* A vehicle entering an edge at step boundary ``t`` reaches the edge's
  downstream junction after ``ceil(length/speed / step)`` whole steps.
* Signalized junctions hold one FIFO queue per incoming edge. During a
  step whose approach shows green, the queue head departs at the edge's
  saturation flow: each green step adds ``sat_flow * step`` vehicles of
  capacity to a fractional accumulator, whole vehicles leave, and the
  accumulator is cleared whenever the approach is red or empty.
* A vehicle discharged (or passing an unsignalized junction) enters its
  next edge at the start of the same step, so an unimpeded trip takes
  exactly its rounded free-flow time.
* Waiting accrues ``step`` seconds for every step a queued vehicle does
  not move; queue lengths are recorded after discharge, which makes
  summed queue time equal summed waiting per junction.
* Vehicles finish at the end of their final edge; there is no exit queue.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .errors import invalid_params
from .network import RoadNetwork
from .demand import RoutePlan, TripTable
from .signals import SignalPlan


@dataclass(frozen=True)
class SimConfig:
    end_s: float
    step_s: float = 1.0
    detector_edges: tuple[str, ...] = ()
    detector_interval_s: float = 300.0


@dataclass(frozen=True)
class ActuatedParams:
    phases: tuple[frozenset[str], ...]
    min_green_s: float = 5.0
    max_green_s: float = 60.0
    gap_s: float = 3.0
    clearance_s: float = 4.0


@dataclass(frozen=True)
class StaticControl:
    plan: SignalPlan


@dataclass(frozen=True)
class ActuatedControl:
    params: ActuatedParams


Controller = StaticControl | ActuatedControl


@dataclass
class VehicleRecord:
    id: str
    depart_s: float
    arrive_s: float | None
    waiting_s: float
    freeflow_s: float


@dataclass
class SimOutput:
    vehicles: list[VehicleRecord]
    junction_queues: dict[str, dict[str, list[int]]]
    detector_entries: dict[str, list[int]]
    detector_resolution_s: float
    detector_interval_s: float
    detector_edges: list[str]
    approach_arrivals: dict[str, dict[str, int]]
    inserted: int
    arrived: int
    active_at_end: int
    step_s: float
    end_s: float


class _StaticState:
    def __init__(self, plan: SignalPlan):
        self.plan = plan

    def greens(self, t: float, queue_len) -> frozenset[str]:
        plan = self.plan
        u = (t - plan.offset_s) % plan.cycle_s
        acc = 0.0
        for phase in plan.phases:
            if u < acc + phase.duration_s - 1e-9:
                return phase.green_edges
            acc += phase.duration_s + plan.clearance_s
            if u < acc - 1e-9:
                return frozenset()
        return frozenset()


class _ActuatedState:
    def __init__(self, params: ActuatedParams, step_s: float):
        self.p = params
        self.step_s = step_s
        self.phase_i = 0
        self.timer = 0.0
        self.in_clearance = False
        self.next_check = params.min_green_s

    def greens(self, t: float, queue_len) -> frozenset[str]:
        p = self.p
        n = len(p.phases)
        if self.in_clearance:
            if self.timer >= p.clearance_s - 1e-9:
                self.in_clearance = False
                self.phase_i = (self.phase_i + 1) % n
                self.timer = 0.0
                self.next_check = p.min_green_s
            else:
                self.timer += self.step_s
                return frozenset()
        green = p.phases[self.phase_i]
        self.timer += self.step_s
        if n > 1:
            terminate = self.timer >= p.max_green_s - 1e-9
            if not terminate and self.timer >= self.next_check - 1e-9:
                if any(queue_len(e) > 0 for e in green):
                    self.next_check += p.gap_s
                else:
                    terminate = True
            if terminate:
                if p.clearance_s > 0:
                    self.in_clearance = True
                    self.timer = 0.0
                else:
                    self.phase_i = (self.phase_i + 1) % n
                    self.timer = 0.0
                    self.next_check = p.min_green_s
        return green


@dataclass
class _Vehicle:
    seq: int
    trip_id: str
    depart_s: float
    route: list[str]
    leg: int = 0
    waiting_s: float = 0.0
    freeflow_s: float = 0.0
    queue_join_step: int = -1


def traversal_steps(length_m: float, speed_mps: float, step_s: float) -> int:
    return max(1, math.ceil(length_m / speed_mps / step_s - 1e-9))


def run_simulation(network: RoadNetwork, trips: TripTable, routes: RoutePlan,
                   controllers: dict[str, Controller], config: SimConfig) -> SimOutput:
    """Run the point-queue model to config.end_s and collect records."""
    step = config.step_s
    if step <= 0:
        raise invalid_params("step_s must be positive", param="step_s")
    n_steps = config.end_s / step
    if abs(n_steps - round(n_steps)) > 1e-9 or config.end_s <= 0:
        raise invalid_params("end_s must be a positive multiple of step_s",
                             param="end_s")
    n_steps = int(round(n_steps))

    edge_by_id = network.edge_by_id
    node_by_id = network.node_by_id
    signalized = set(network.signalized_nodes())

    for junction in signalized:
        if junction not in controllers:
            raise invalid_params(f"signalized junction {junction} has no controller",
                                 junction=junction)
    for junction, controller in controllers.items():
        node = node_by_id.get(junction)
        if node is None or not node.signalized:
            raise invalid_params(
                f"controller attached to non-signalized junction {junction}",
                junction=junction)
        incoming = {e.id for e in network.in_edges.get(junction, ())}
        if isinstance(controller, StaticControl):
            if controller.plan.junction != junction:
                raise invalid_params(
                    f"plan for {controller.plan.junction} attached to junction {junction}",
                    junction=junction)
            served = set().union(*(p.green_edges for p in controller.plan.phases))
        else:
            served = set().union(*controller.params.phases)
        if served != incoming:
            raise invalid_params(
                f"controller at {junction} serves {sorted(served)} but approaches "
                f"are {sorted(incoming)}", junction=junction)

    for eid in config.detector_edges:
        if eid not in edge_by_id:
            raise invalid_params(f"detector edge {eid!r} not in network", edge=eid)

    # resolve and validate routes up front
    vehicles: list[_Vehicle] = []
    for seq, trip in enumerate(trips.trips):
        route = routes.routes.get(trip.id)
        if not route:
            raise invalid_params(f"trip {trip.id} has no route", trip=trip.id)
        if route[0] != trip.from_edge or route[-1] != trip.to_edge:
            raise invalid_params(f"route for trip {trip.id} does not match its endpoints",
                                 trip=trip.id)
        freeflow = 0.0
        for prev, nxt in zip(route, route[1:]):
            if prev not in edge_by_id or nxt not in edge_by_id:
                raise invalid_params(f"route for trip {trip.id} uses unknown edges",
                                     trip=trip.id)
            if edge_by_id[prev].to_node != edge_by_id[nxt].from_node:
                raise invalid_params(f"route for trip {trip.id} is not connected",
                                     trip=trip.id)
        for eid in route:
            freeflow += edge_by_id[eid].freeflow_s
        vehicles.append(_Vehicle(seq=seq, trip_id=trip.id, depart_s=trip.depart_s,
                                 route=route, freeflow_s=freeflow))
    vehicles.sort(key=lambda v: (v.depart_s, v.seq))

    states: dict[str, _StaticState | _ActuatedState] = {}
    for junction in sorted(signalized):
        controller = controllers[junction]
        if isinstance(controller, StaticControl):
            states[junction] = _StaticState(controller.plan)
        else:
            states[junction] = _ActuatedState(controller.params, step)

    queues: dict[str, dict[str, deque[_Vehicle]]] = {}
    series: dict[str, dict[str, list[int]]] = {}
    arrivals_count: dict[str, dict[str, int]] = {}
    for junction in sorted(signalized):
        incoming = [e.id for e in network.in_edges.get(junction, ())]
        queues[junction] = {eid: deque() for eid in incoming}
        series[junction] = {eid: [0] * n_steps for eid in incoming}
        arrivals_count[junction] = {eid: 0 for eid in incoming}

    detector_set = set(config.detector_edges)
    detector_entries = {eid: [0] * n_steps for eid in sorted(detector_set)}

    arrivals_at: dict[int, list[_Vehicle]] = {}
    records: dict[int, VehicleRecord] = {}
    discharge_acc: dict[tuple[str, str], float] = {}
    next_insert = 0
    inserted = arrived = 0

    def enter_edge(veh: _Vehicle, k: int) -> None:
        eid = veh.route[veh.leg]
        if eid in detector_set:
            detector_entries[eid][k] += 1
        edge = edge_by_id[eid]
        due = k + traversal_steps(edge.length_m, edge.speed_mps, step)
        arrivals_at.setdefault(due, []).append(veh)

    for k in range(n_steps):
        t = k * step

        while next_insert < len(vehicles) and vehicles[next_insert].depart_s <= t + 1e-9:
            veh = vehicles[next_insert]
            next_insert += 1
            inserted += 1
            records[veh.seq] = VehicleRecord(id=veh.trip_id, depart_s=veh.depart_s,
                                             arrive_s=None, waiting_s=0.0,
                                             freeflow_s=veh.freeflow_s)
            enter_edge(veh, k)

        for veh in arrivals_at.pop(k, ()):  # traversal completed at time t
            eid = veh.route[veh.leg]
            if veh.leg == len(veh.route) - 1:
                arrived += 1
                rec = records[veh.seq]
                rec.arrive_s = t
                rec.waiting_s = veh.waiting_s
                continue
            junction = edge_by_id[eid].to_node
            if junction in signalized:
                veh.queue_join_step = k
                queues[junction][eid].append(veh)
                arrivals_count[junction][eid] += 1
            else:  # unsignalized: instantaneous, capacity-unbounded transfer
                veh.leg += 1
                enter_edge(veh, k)

        for junction in queues:
            junction_queues = queues[junction]
            greens = states[junction].greens(t, lambda e: len(junction_queues[e]))
            for eid, queue in junction_queues.items():
                key = (junction, eid)
                if eid in greens and queue:
                    acc = discharge_acc.get(key, 0.0) + edge_by_id[eid].sat_flow_vps * step
                    allowed = int(math.floor(acc + 1e-9))
                    moved = 0
                    while moved < allowed and queue:
                        veh = queue.popleft()
                        veh.waiting_s += (k - veh.queue_join_step) * step
                        veh.leg += 1
                        enter_edge(veh, k)
                        moved += 1
                    discharge_acc[key] = 0.0 if not queue else acc - moved
                else:
                    discharge_acc[key] = 0.0
                series[junction][eid][k] = len(queue)

    for junction_queues in queues.values():
        for queue in junction_queues.values():
            for veh in queue:
                veh.waiting_s += (n_steps - veh.queue_join_step) * step
    for veh in vehicles:
        rec = records.get(veh.seq)
        if rec is not None and rec.arrive_s is None:
            rec.waiting_s = veh.waiting_s

    ordered = [records[seq] for seq in sorted(records)]
    return SimOutput(
        vehicles=ordered,
        junction_queues=series,
        detector_entries=detector_entries,
        detector_resolution_s=step,
        detector_interval_s=config.detector_interval_s,
        detector_edges=sorted(detector_set),
        approach_arrivals=arrivals_count,
        inserted=inserted,
        arrived=arrived,
        active_at_end=inserted - arrived,
        step_s=step,
        end_s=config.end_s,
    )


def _bucketize(entries: list[int], resolution_s: float, interval_s: float,
               end_s: float) -> list[int]:
    ratio = interval_s / resolution_s
    if interval_s <= 0 or abs(ratio - round(ratio)) > 1e-9:
        raise invalid_params(
            f"interval {interval_s} is not a multiple of the recorded "
            f"resolution {resolution_s}", param="interval_s")
    group = int(round(ratio))
    n_buckets = math.ceil(end_s / interval_s - 1e-9)
    counts = [0] * n_buckets
    for i, c in enumerate(entries):
        counts[min(i // group, n_buckets - 1)] += c
    return counts


def extract_detector_counts(output: SimOutput, edges: list[str],
                            interval_s: float) -> dict[str, list[int]]:
    """Entered-vehicle counts per edge per interval.

    Edges must have been configured as detectors for the run; the interval
    must be a multiple of the output's recording resolution.
    """
    configured = set(output.detector_edges)
    table: dict[str, list[int]] = {}
    for eid in edges:
        if eid not in configured:
            raise invalid_params(f"edge {eid!r} was not configured as a detector",
                                 edge=eid)
        table[eid] = _bucketize(output.detector_entries[eid],
                                output.detector_resolution_s, interval_s,
                                output.end_s)
    return table


# ---------------------------------------------------------------------------
# file format

def sim_output_to_dict(output: SimOutput) -> dict:
    detectors = {eid: _bucketize(entries, output.detector_resolution_s,
                                 output.detector_interval_s, output.end_s)
                 for eid, entries in sorted(output.detector_entries.items())}
    return {
        "vehicles": [{"id": r.id, "depart_s": r.depart_s, "arrive_s": r.arrive_s,
                      "waiting_s": r.waiting_s, "freeflow_s": r.freeflow_s}
                     for r in output.vehicles],
        "junction_queues": {j: {e: list(c) for e, c in sorted(series.items())}
                            for j, series in sorted(output.junction_queues.items())},
        "detectors": detectors,
        "totals": {"inserted": output.inserted, "arrived": output.arrived,
                   "active": output.active_at_end},
        "approach_arrivals": {j: dict(sorted(counts.items()))
                              for j, counts in sorted(output.approach_arrivals.items())},
        "config": {"step_s": output.step_s, "end_s": output.end_s,
                   "detector_interval_s": output.detector_interval_s,
                   "detector_edges": list(output.detector_edges)},
    }


def write_sim_output(output: SimOutput, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(sim_output_to_dict(output), indent=1) + "\n",
                    encoding="utf-8")
    return path


def read_sim_output(path: str | Path) -> SimOutput:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = payload["config"]
        vehicles = [VehicleRecord(id=v["id"], depart_s=float(v["depart_s"]),
                                  arrive_s=None if v["arrive_s"] is None else float(v["arrive_s"]),
                                  waiting_s=float(v["waiting_s"]),
                                  freeflow_s=float(v["freeflow_s"]))
                    for v in payload["vehicles"]]
        return SimOutput(
            vehicles=vehicles,
            junction_queues={j: {e: list(map(int, c)) for e, c in series.items()}
                             for j, series in payload["junction_queues"].items()},
            detector_entries={e: list(map(int, c))
                              for e, c in payload["detectors"].items()},
            detector_resolution_s=float(cfg["detector_interval_s"]),
            detector_interval_s=float(cfg["detector_interval_s"]),
            detector_edges=list(cfg["detector_edges"]),
            approach_arrivals={j: {e: int(c) for e, c in counts.items()}
                               for j, counts in payload["approach_arrivals"].items()},
            inserted=int(payload["totals"]["inserted"]),
            arrived=int(payload["totals"]["arrived"]),
            active_at_end=int(payload["totals"]["active"]),
            step_s=float(cfg["step_s"]),
            end_s=float(cfg["end_s"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise invalid_params(f"simulation output {path} is malformed: {exc}",
                             param="sim_output") from exc
