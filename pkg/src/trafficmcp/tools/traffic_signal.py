"""Handlers for the traffic_signal sub-module."""

from __future__ import annotations

import json

from .. import signals
from ..errors import invalid_params
from ..network import read_network
from ..simulator import read_sim_output


def _target_junctions(net, args):
    junctions = args.get("junctions") or net.signalized_nodes()
    for j in junctions:
        node = net.node_by_id.get(j)
        if node is None or not node.signalized:
            raise invalid_params(f"junction {j!r} is not a signalized node",
                                 junction=j)
    return junctions


def fixed_plan(ctx, args):
    net = read_network(ctx.resolve(args["network"]))
    plans = [signals.fixed_plan(net, j, cycle_s=args.get("cycle_s", 60),
                                clearance_s=args.get("clearance_s", 4))
             for j in _target_junctions(net, args)]
    path = signals.write_tls_csv(plans, ctx.out_path(args.get("out", "plans.csv")))
    return {"path": ctx.display(path), "junctions": [p.junction for p in plans]}


def webster_plan(ctx, args):
    net = read_network(ctx.resolve(args["network"]))
    flows_vph = args["flows"]  # edge id -> vehicles per hour
    clearance = args.get("clearance_s", 4)
    plans, all_warnings = [], {}
    for junction in _target_junctions(net, args):
        groups = signals.approach_phases(net, junction)
        phase_flows = [
            [signals.ApproachFlow(edge=eid,
                                  flow_vps=float(flows_vph.get(eid, 0.0)) / 3600.0,
                                  sat_flow_vps=net.edge_by_id[eid].sat_flow_vps)
             for eid in group]
            for group in groups
        ]
        plan, warnings = signals.webster_plan(junction, phase_flows, clearance)
        plans.append(plan)
        if warnings:
            all_warnings[junction] = warnings
    path = signals.write_tls_csv(plans, ctx.out_path(args.get("out", "plans.csv")))
    return {"path": ctx.display(path), "junctions": [p.junction for p in plans],
            "warnings": all_warnings}


def greenwave_offsets(ctx, args):
    plans = signals.read_tls_csv(ctx.resolve(args["tls"]))
    by_junction = {p.junction: p for p in plans}
    junctions = args["junctions"]
    missing = [j for j in junctions if j not in by_junction]
    if missing:
        raise invalid_params(f"no plans for junctions {missing}", junctions=missing)
    selected = [by_junction[j] for j in junctions]
    # plans along a corridor may carry different Webster cycles; normalize
    # to the largest before computing offsets
    max_cycle = max(p.cycle_s for p in selected)
    selected = [signals.rescale_plan_cycle(p, max_cycle) for p in selected]
    through = args.get("through_edges")
    if through is not None:
        through = [t if t else None for t in through]
    coordinated = signals.greenwave_offsets(selected, [float(p) for p in args["positions_m"]],
                                            args["progression_speed_mps"], through)
    for plan in coordinated:
        by_junction[plan.junction] = plan
    ordered = [by_junction[p.junction] for p in plans]
    path = signals.write_tls_csv(ordered, ctx.out_path(args.get("out", "plans.csv")))
    return {"path": ctx.display(path),
            "offsets_s": {p.junction: p.offset_s for p in coordinated},
            "cycle_s": max_cycle}


def tls_to_csv(ctx, args):
    payload = json.loads(ctx.resolve(args["plans"]).read_text(encoding="utf-8"))
    plans = signals.plans_from_dict(payload)
    path = signals.write_tls_csv(plans, ctx.out_path(args.get("out", "plans.csv")))
    return {"path": ctx.display(path), "junctions": [p.junction for p in plans]}


def csv_to_tls(ctx, args):
    plans = signals.read_tls_csv(ctx.resolve(args["tls"]))
    out = ctx.out_path(args.get("out", "plans.json"))
    out.write_text(json.dumps(signals.plans_to_dict(plans), indent=2) + "\n",
                   encoding="utf-8")
    return {"path": ctx.display(out), "junctions": [p.junction for p in plans]}


def detect_congestion(ctx, args):
    output = read_sim_output(ctx.resolve(args["sim_output"]))
    ranking = signals.detect_congestion(output, args["k"])
    return {"ranking": [{"junction": e.junction,
                         "queue_time_vehs": e.queue_time_vehs,
                         "max_queue_veh": e.max_queue_veh} for e in ranking]}


def optimize_signals(ctx, args):
    net = read_network(ctx.resolve(args["network"]))
    output = read_sim_output(ctx.resolve(args["sim_output"]))
    plans = signals.read_tls_csv(ctx.resolve(args["tls"]))
    new_plans, changes = signals.optimize_signals(
        net, output, {p.junction: p for p in plans}, args["k"],
        progression_speed_mps=args.get("progression_speed_mps", 12.0))
    ordered = [new_plans[p.junction] for p in plans]
    path = signals.write_tls_csv(ordered, ctx.out_path(args.get("out", "plans_optimized.csv")))
    changes_path = ctx.out_path(args.get("out_changes", "changes.json"))
    changes_path.write_text(json.dumps({"changes": changes}, indent=2) + "\n",
                            encoding="utf-8")
    return {"path": ctx.display(path), "changes_path": ctx.display(changes_path),
            "changes": changes}


HANDLERS = {
    "fixed_plan": fixed_plan,
    "webster_plan": webster_plan,
    "greenwave_offsets": greenwave_offsets,
    "tls_to_csv": tls_to_csv,
    "csv_to_tls": csv_to_tls,
    "detect_congestion": detect_congestion,
    "optimize_signals": optimize_signals,
}
