"""Signal timing: fixed plans, Webster timing, green-wave offsets,
congestion ranking, plan optimization, and the CSV interchange format.

A plan's cycle always equals the sum of phase durations plus one
clearance (all-red) interval per phase; offsets are whole seconds in
[0, cycle).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import invalid_params
from .network import RoadNetwork

WEBSTER_MIN_CYCLE_S = 30
WEBSTER_MAX_CYCLE_S = 120
WEBSTER_SATURATION_CAP = 0.9

TLS_CSV_HEADER = ["junction", "cycle_s", "offset_s", "clearance_s",
                  "phase_index", "green_edges", "duration_s"]


@dataclass(frozen=True)
class Phase:
    green_edges: frozenset[str]
    duration_s: int


@dataclass(frozen=True)
class SignalPlan:
    junction: str
    cycle_s: int
    offset_s: int
    clearance_s: int
    phases: tuple[Phase, ...]


@dataclass(frozen=True)
class ApproachFlow:
    edge: str
    flow_vps: float
    sat_flow_vps: float


@dataclass
class CongestionEntry:
    junction: str
    queue_time_vehs: float
    max_queue_veh: int


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def validate_plan(plan: SignalPlan) -> None:
    if not plan.phases:
        raise invalid_params(f"plan for {plan.junction} has no phases",
                             junction=plan.junction)
    total = sum(p.duration_s for p in plan.phases) + len(plan.phases) * plan.clearance_s
    if total != plan.cycle_s:
        raise invalid_params(
            f"plan for {plan.junction}: durations + clearances = {total}, "
            f"cycle is {plan.cycle_s}", junction=plan.junction)
    if not 0 <= plan.offset_s < plan.cycle_s:
        raise invalid_params(f"plan for {plan.junction}: offset outside [0, cycle)",
                             junction=plan.junction)
    for phase in plan.phases:
        if phase.duration_s <= 0:
            raise invalid_params(f"plan for {plan.junction}: non-positive phase duration",
                                 junction=plan.junction)
        if not phase.green_edges:
            raise invalid_params(f"plan for {plan.junction}: phase with no approaches",
                                 junction=plan.junction)


def allocate_greens(total: int, weights: list[float]) -> list[int]:
    """Split ``total`` seconds proportionally to weights.

    Largest-remainder rounding: quotas are floored, leftover seconds go to
    the largest fractional remainders (ties to the lower index). Every
    phase keeps at least one second; the result always sums to ``total``.
    """
    n = len(weights)
    if total < n:
        raise invalid_params(f"cannot split {total} s across {n} phases")
    wsum = sum(weights)
    if wsum <= 0:
        quotas = [total / n] * n
    else:
        quotas = [total * w / wsum for w in weights]
    greens = [int(math.floor(q)) for q in quotas]
    leftover = total - sum(greens)
    order = sorted(range(n), key=lambda i: (-(quotas[i] - greens[i]), i))
    for i in range(leftover):
        greens[order[i % n]] += 1
    # enforce the 1 s floor without breaking the sum
    donors = sorted(range(n), key=lambda i: -greens[i])
    for i in range(n):
        while greens[i] < 1:
            for d in donors:
                if greens[d] > 1:
                    greens[d] -= 1
                    greens[i] += 1
                    break
            else:
                raise invalid_params("not enough green time to cover all phases")
    return greens


def approach_phases(network: RoadNetwork, junction: str) -> list[list[str]]:
    """Default two-phase grouping of a junction's approaches by axis.

    Approaches running mostly east-west form the first phase, the rest the
    second; either group may be absent. Edge ids are sorted for
    determinism.
    """
    node = network.node_by_id.get(junction)
    if node is None:
        raise invalid_params(f"unknown junction {junction!r}", junction=junction)
    horizontals: list[str] = []
    verticals: list[str] = []
    for edge in network.in_edges.get(junction, ()):
        src = network.node_by_id[edge.from_node]
        dx = node.x - src.x
        dy = node.y - src.y
        (horizontals if abs(dx) >= abs(dy) else verticals).append(edge.id)
    groups = [sorted(g) for g in (horizontals, verticals) if g]
    if not groups:
        raise invalid_params(f"junction {junction!r} has no incoming edges",
                             junction=junction)
    return groups


def fixed_plan(network: RoadNetwork, junction: str,
               groups: list[list[str]] | None = None,
               cycle_s: int = 60, clearance_s: int = 4) -> SignalPlan:
    """Equal-split plan at a junction, offset zero."""
    if groups is None:
        groups = approach_phases(network, junction)
    incoming = {e.id for e in network.in_edges.get(junction, ())}
    grouped = [eid for g in groups for eid in g]
    missing = incoming - set(grouped)
    if missing:
        raise invalid_params(
            f"grouping for {junction} misses approaches {sorted(missing)}",
            junction=junction)
    unknown = set(grouped) - incoming
    if unknown:
        raise invalid_params(
            f"grouping for {junction} names non-approach edges {sorted(unknown)}",
            junction=junction)
    n = len(groups)
    green_total = cycle_s - n * clearance_s
    if green_total < n:
        raise invalid_params(
            f"cycle {cycle_s} leaves no green time after {n} clearances of "
            f"{clearance_s} s", junction=junction, param="cycle_s")
    greens = allocate_greens(green_total, [1.0] * n)
    phases = tuple(Phase(green_edges=frozenset(g), duration_s=d)
                   for g, d in zip(groups, greens))
    plan = SignalPlan(junction=junction, cycle_s=cycle_s, offset_s=0,
                      clearance_s=clearance_s, phases=phases)
    validate_plan(plan)
    return plan


def webster_plan(junction: str, phase_flows: list[list[ApproachFlow]],
                 clearance_s: int = 4) -> tuple[SignalPlan, list[str]]:
    """Webster-timed plan from per-phase approach flows.

    Cycle length is (1.5 L + 5) / (1 - Y) with L the total lost time and Y
    the sum of critical flow ratios, clamped to [30, 120] s and rounded to
    the nearest second. Green time is split proportionally to the critical
    ratios. Saturated inputs (Y >= 0.9) are clamped and flagged rather
    than rejected so optimization can proceed on congested networks.
    """
    if not phase_flows or any(not phase for phase in phase_flows):
        raise invalid_params("every phase needs at least one approach flow",
                             junction=junction)
    warnings: list[str] = []
    ys: list[float] = []
    for phase in phase_flows:
        ratios = []
        for af in phase:
            if af.sat_flow_vps <= 0:
                raise invalid_params(f"approach {af.edge}: non-positive saturation flow",
                                     junction=junction)
            ratios.append(max(0.0, af.flow_vps) / af.sat_flow_vps)
        ys.append(max(ratios))
    n = len(phase_flows)
    lost = n * clearance_s
    y_total = sum(ys)
    if y_total <= 0:
        warnings.append("no demand")
        cycle = max(WEBSTER_MIN_CYCLE_S, lost + n)
        greens = allocate_greens(cycle - lost, [1.0] * n)
    else:
        if y_total >= WEBSTER_SATURATION_CAP:
            warnings.append("oversaturated")
            y_total = WEBSTER_SATURATION_CAP
        raw = (1.5 * lost + 5) / (1 - y_total)
        cycle = _round_half_up(min(WEBSTER_MAX_CYCLE_S, max(WEBSTER_MIN_CYCLE_S, raw)))
        cycle = max(cycle, lost + n)
        greens = allocate_greens(cycle - lost, ys)
    phases = tuple(Phase(green_edges=frozenset(af.edge for af in phase), duration_s=d)
                   for phase, d in zip(phase_flows, greens))
    plan = SignalPlan(junction=junction, cycle_s=cycle, offset_s=0,
                      clearance_s=clearance_s, phases=phases)
    validate_plan(plan)
    return plan, warnings


def greenwave_offsets(plans: list[SignalPlan], positions_m: list[float],
                      progression_speed_mps: float,
                      through_edges: list[str | None] | None = None) -> list[SignalPlan]:
    """Stagger offsets along an arterial so a platoon meets green lights.

    Junction ``j`` gets offset round(position_j / speed) mod cycle; the
    first position must be zero. When ``through_edges`` names the arterial
    approach at a junction, the phase serving it is moved to the front so
    the offset points at its green.
    """
    if not plans:
        return []
    if len(plans) != len(positions_m):
        raise invalid_params("positions and plans differ in length", param="positions_m")
    if positions_m[0] != 0:
        raise invalid_params("first junction position must be 0", param="positions_m")
    if any(b <= a for a, b in zip(positions_m, positions_m[1:])):
        raise invalid_params("positions must be strictly increasing", param="positions_m")
    if progression_speed_mps <= 0:
        raise invalid_params("progression speed must be positive",
                             param="progression_speed_mps")
    cycles = {p.cycle_s for p in plans}
    if len(cycles) > 1:
        offenders = sorted({p.junction for p in plans})
        raise invalid_params(
            f"green wave needs one shared cycle, got {sorted(cycles)} across {offenders}",
            junctions=offenders)
    cycle = plans[0].cycle_s
    if through_edges is not None and len(through_edges) != len(plans):
        raise invalid_params("through_edges and plans differ in length",
                             param="through_edges")

    updated: list[SignalPlan] = []
    for i, plan in enumerate(plans):
        offset = _round_half_up(positions_m[i] / progression_speed_mps) % cycle
        phases = plan.phases
        if through_edges is not None and through_edges[i] is not None:
            through = through_edges[i]
            idx = next((k for k, ph in enumerate(phases) if through in ph.green_edges), None)
            if idx is None:
                raise invalid_params(
                    f"through edge {through!r} not served by any phase at {plan.junction}",
                    junction=plan.junction)
            if idx:
                phases = phases[idx:] + phases[:idx]
        updated.append(replace(plan, offset_s=offset, phases=phases))
    for plan in updated:
        validate_plan(plan)
    return updated


def rescale_plan_cycle(plan: SignalPlan, cycle_s: int) -> SignalPlan:
    """Stretch or shrink a plan to a new cycle, keeping green proportions."""
    green_total = cycle_s - len(plan.phases) * plan.clearance_s
    if green_total < len(plan.phases):
        raise invalid_params(
            f"cycle {cycle_s} too short for {len(plan.phases)} phases at {plan.junction}",
            junction=plan.junction)
    greens = allocate_greens(green_total, [float(p.duration_s) for p in plan.phases])
    phases = tuple(Phase(green_edges=p.green_edges, duration_s=g)
                   for p, g in zip(plan.phases, greens))
    new = replace(plan, cycle_s=cycle_s, offset_s=min(plan.offset_s, cycle_s - 1),
                  phases=phases)
    validate_plan(new)
    return new


# ---------------------------------------------------------------------------
# congestion and optimization

def detect_congestion(output, k: int) -> list[CongestionEntry]:
    """Rank signalized junctions by accumulated queue time, top k.

    Queue time is vehicle-seconds summed over every step and approach;
    ties break toward the lexicographically smaller junction id.
    """
    if k <= 0:
        return []
    entries = []
    for junction in sorted(output.junction_queues):
        series = output.junction_queues[junction]
        queue_time = 0.0
        max_queue = 0
        for counts in series.values():
            queue_time += sum(counts) * output.step_s
            if counts:
                max_queue = max(max_queue, max(counts))
        entries.append(CongestionEntry(junction=junction,
                                       queue_time_vehs=queue_time,
                                       max_queue_veh=max_queue))
    entries.sort(key=lambda e: (-e.queue_time_vehs, e.junction))
    return entries[:k]


def find_chains(network: RoadNetwork, junctions: list[str]) -> list[list[str]]:
    """Simple paths of selected junctions linked by direct edges."""
    links: dict[str, dict[str, str]] = {j: {} for j in junctions}
    selected = set(junctions)
    for edge in network.edges:
        if edge.from_node in selected and edge.to_node in selected:
            current = links[edge.from_node].get(edge.to_node)
            if current is None or edge.id < current:
                links[edge.from_node][edge.to_node] = edge.id
    chains: list[list[str]] = []

    def extend(path: list[str]) -> None:
        grew = False
        for nxt in sorted(links[path[-1]]):
            if nxt not in path:
                extend(path + [nxt])
                grew = True
        if not grew and len(path) >= 2:
            chains.append(path)

    for start in junctions:
        extend([start])
    return chains


def optimize_signals(network: RoadNetwork, output, plans: dict[str, SignalPlan],
                     k: int, progression_speed_mps: float = 12.0,
                     ) -> tuple[dict[str, SignalPlan], list[dict]]:
    """Retime the k most congested junctions from measured demand.

    Each selected junction gets a Webster plan fed by its measured
    approach flows (stop-line arrivals over the horizon), keeping the
    existing phase grouping. If selected junctions form a corridor, the
    longest chain is normalized to its largest cycle and given green-wave
    offsets. Junctions with no measured demand are left alone.
    """
    ranking = detect_congestion(output, k)
    horizon = output.end_s
    new_plans = dict(plans)
    changes: list[dict] = []
    retimed: list[str] = []

    for entry in ranking:
        junction = entry.junction
        old = plans.get(junction)
        if old is None:
            raise invalid_params(f"no current plan for congested junction {junction}",
                                 junction=junction)
        arrivals = output.approach_arrivals.get(junction, {})
        total_demand = sum(arrivals.values())
        if total_demand == 0:
            changes.append({"junction": junction, "action": "unchanged",
                            "reason": "no measured demand"})
            continue
        edge_by_id = network.edge_by_id
        phase_flows = [
            [ApproachFlow(edge=eid, flow_vps=arrivals.get(eid, 0) / horizon,
                          sat_flow_vps=edge_by_id[eid].sat_flow_vps)
             for eid in sorted(phase.green_edges)]
            for phase in old.phases
        ]
        new, warnings = webster_plan(junction, phase_flows, clearance_s=old.clearance_s)
        new_plans[junction] = new
        retimed.append(junction)
        changes.append({
            "junction": junction, "action": "retimed",
            "old_cycle_s": old.cycle_s, "new_cycle_s": new.cycle_s,
            "old_durations": [p.duration_s for p in old.phases],
            "new_durations": [p.duration_s for p in new.phases],
            "old_offset_s": old.offset_s, "new_offset_s": new.offset_s,
            "warnings": warnings,
        })

    if len(retimed) >= 2:
        chains = find_chains(network, sorted(retimed))
        if chains:
            chains.sort(key=lambda c: (-len(c), c))
            chain = chains[0]
            max_cycle = max(new_plans[j].cycle_s for j in chain)
            normalized = [rescale_plan_cycle(new_plans[j], max_cycle) for j in chain]
            positions = [0.0]
            through: list[str | None] = [None]
            for prev, here in zip(chain, chain[1:]):
                edge = min(
                    (e for e in network.edges
                     if e.from_node == prev and e.to_node == here),
                    key=lambda e: e.id)
                positions.append(positions[-1] + edge.length_m)
                through.append(edge.id)
            coordinated = greenwave_offsets(normalized, positions,
                                            progression_speed_mps, through)
            for junction, plan in zip(chain, coordinated):
                new_plans[junction] = plan
            changes.append({"action": "greenwave", "chain": chain,
                            "cycle_s": max_cycle,
                            "offsets_s": [p.offset_s for p in coordinated]})
    return new_plans, changes


# ---------------------------------------------------------------------------
# CSV interchange

def tls_to_csv(plans: list[SignalPlan]) -> str:
    """Render plans as CSV, one row per phase, junctions contiguous."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TLS_CSV_HEADER)
    for plan in plans:
        for idx, phase in enumerate(plan.phases):
            writer.writerow([plan.junction, plan.cycle_s, plan.offset_s,
                             plan.clearance_s, idx,
                             "|".join(sorted(phase.green_edges)), phase.duration_s])
    return buf.getvalue()


def csv_to_tls(document: str) -> list[SignalPlan]:
    """Parse the CSV interchange format back into validated plans."""
    reader = csv.reader(io.StringIO(document))
    header = next(reader, None)
    if header != TLS_CSV_HEADER:
        raise invalid_params(
            f"signal CSV must start with header {','.join(TLS_CSV_HEADER)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            rows.append((lineno, row[0], int(row[1]), int(row[2]), int(row[3]),
                         int(row[4]), row[5], int(row[6])))
        except (IndexError, ValueError) as exc:
            raise invalid_params(f"signal CSV row {lineno}: {exc}", row=lineno) from exc

    plans: list[SignalPlan] = []
    seen: set[str] = set()
    i = 0
    while i < len(rows):
        lineno, junction, cycle, offset, clearance, phase_index, edges, duration = rows[i]
        if junction in seen:
            raise invalid_params(
                f"signal CSV row {lineno}: rows for junction {junction} are not contiguous",
                row=lineno, junction=junction)
        phases = []
        expected = 0
        while i < len(rows) and rows[i][1] == junction:
            lineno, _, c, o, cl, idx, edges, duration = rows[i]
            if (c, o, cl) != (cycle, offset, clearance):
                raise invalid_params(
                    f"signal CSV row {lineno}: cycle/offset/clearance differ within "
                    f"junction {junction}", row=lineno, junction=junction)
            if idx != expected:
                raise invalid_params(
                    f"signal CSV row {lineno}: phase_index {idx}, expected {expected}",
                    row=lineno, junction=junction)
            green = frozenset(e for e in edges.split("|") if e)
            if not green:
                raise invalid_params(f"signal CSV row {lineno}: empty green_edges",
                                     row=lineno, junction=junction)
            phases.append(Phase(green_edges=green, duration_s=duration))
            expected += 1
            i += 1
        plan = SignalPlan(junction=junction, cycle_s=cycle, offset_s=offset,
                          clearance_s=clearance, phases=tuple(phases))
        try:
            validate_plan(plan)
        except Exception as exc:
            raise invalid_params(f"signal CSV row {lineno}: {exc}", row=lineno,
                                 junction=junction) from exc
        plans.append(plan)
        seen.add(junction)
    return plans


def write_tls_csv(plans: list[SignalPlan], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(tls_to_csv(plans), encoding="utf-8")
    return path


def read_tls_csv(path: str | Path) -> list[SignalPlan]:
    return csv_to_tls(Path(path).read_text(encoding="utf-8"))


def plans_to_dict(plans: list[SignalPlan]) -> dict:
    return {"plans": [
        {"junction": p.junction, "cycle_s": p.cycle_s, "offset_s": p.offset_s,
         "clearance_s": p.clearance_s,
         "phases": [{"green_edges": sorted(ph.green_edges),
                     "duration_s": ph.duration_s} for ph in p.phases]}
        for p in plans]}


def plans_from_dict(payload: dict) -> list[SignalPlan]:
    try:
        plans = [
            SignalPlan(
                junction=p["junction"], cycle_s=int(p["cycle_s"]),
                offset_s=int(p["offset_s"]), clearance_s=int(p["clearance_s"]),
                phases=tuple(Phase(green_edges=frozenset(ph["green_edges"]),
                                   duration_s=int(ph["duration_s"]))
                             for ph in p["phases"]))
            for p in payload["plans"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise invalid_params(f"bad signal-plan payload: {exc}", param="plans") from exc
    for plan in plans:
        validate_plan(plan)
    return plans
