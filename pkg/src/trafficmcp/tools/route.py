"""Handlers for the route sub-module (demand generation and routing)."""

from __future__ import annotations

from .. import demand
from ..network import read_districts, read_network


def random_trips(ctx, args):
    net = read_network(ctx.resolve(args["network"]))
    table = demand.random_trips(net, args["count"], args["seed"],
                                args["begin_s"], args["end_s"])
    path = demand.write_trips(table, ctx.out_path(args.get("out", "trips.json")))
    return {"path": ctx.display(path), "trips": len(table.trips)}


def od_to_trips(ctx, args):
    od = demand.read_od_csv(ctx.resolve(args["od"]))
    districts = read_districts(ctx.resolve(args["districts"]))
    table = demand.od_to_trips(od, districts, args["seed"])
    path = demand.write_trips(table, ctx.out_path(args.get("out", "trips.json")))
    return {"path": ctx.display(path), "trips": len(table.trips)}


def route_trips(ctx, args):
    net = read_network(ctx.resolve(args["network"]))
    table = demand.read_trips(ctx.resolve(args["trips"]))
    plan, failures = demand.route_trips(net, table)
    path = demand.write_routes(plan, ctx.out_path(args.get("out", "routes.json")))
    return {"path": ctx.display(path), "routed": len(plan.routes),
            "failures": failures}


def turn_ratio_routes(ctx, args):
    net = read_network(ctx.resolve(args["network"]))
    inflows = {edge: int(count) for edge, count in args["inflows"].items()}
    table, plan = demand.turn_ratio_routes(net, args["ratios"], inflows,
                                           args["seed"], args["begin_s"],
                                           args["end_s"])
    trips_path = demand.write_trips(table, ctx.out_path(args.get("out_trips", "trips.json")))
    routes_path = demand.write_routes(plan, ctx.out_path(args.get("out_routes", "routes.json")))
    return {"trips_path": ctx.display(trips_path),
            "routes_path": ctx.display(routes_path),
            "trips": len(table.trips)}


HANDLERS = {
    "random_trips": random_trips,
    "od_to_trips": od_to_trips,
    "route_trips": route_trips,
    "turn_ratio_routes": turn_ratio_routes,
}
