"""Handlers for the simulation sub-module."""

from __future__ import annotations

from ..demand import read_routes, read_trips
from ..errors import invalid_params
from ..network import read_network
from ..signals import approach_phases, read_tls_csv
from ..simulator import (
    ActuatedControl,
    ActuatedParams,
    SimConfig,
    StaticControl,
    run_simulation as _run,
    write_sim_output,
)


def _controllers(ctx, net, args):
    control = args.get("control", "static")
    signalized = net.signalized_nodes()
    if control == "actuated":
        controllers = {}
        for junction in signalized:
            groups = approach_phases(net, junction)
            controllers[junction] = ActuatedControl(ActuatedParams(
                phases=tuple(frozenset(g) for g in groups)))
        return controllers
    if control != "static":
        raise invalid_params(f"control must be 'static' or 'actuated', got {control!r}",
                             param="control")
    if not signalized:
        return {}
    if "tls" not in args:
        raise invalid_params("static control on a signalized network needs a tls file",
                             param="tls")
    plans = read_tls_csv(ctx.resolve(args["tls"]))
    return {p.junction: StaticControl(p) for p in plans}


def run_simulation(ctx, args):
    net = read_network(ctx.resolve(args["network"]))
    trips = read_trips(ctx.resolve(args["trips"]))
    routes = read_routes(ctx.resolve(args["routes"]))
    config = SimConfig(
        end_s=float(args["end_s"]),
        step_s=float(args.get("step_s", 1.0)),
        detector_edges=tuple(args.get("detector_edges", ())),
        detector_interval_s=float(args.get("detector_interval_s", 300.0)))
    output = _run(net, trips, routes, _controllers(ctx, net, args), config)
    path = write_sim_output(output, ctx.out_path(args.get("out", "sim_output.json")))
    return {"path": ctx.display(path),
            "totals": {"inserted": output.inserted, "arrived": output.arrived,
                       "active": output.active_at_end}}


HANDLERS = {"run_simulation": run_simulation}
