"""Handlers for the network sub-module."""

from __future__ import annotations

from pathlib import Path

from .. import network as net


def _summary(ctx, n, path: Path) -> dict:
    return {
        "path": ctx.display(path),
        "nodes": len(n.nodes),
        "edges": len(n.edges),
        "signalized": sum(1 for node in n.nodes if node.signalized),
    }


def generate_grid(ctx, args):
    grid = net.generate_grid(args["rows"], args["cols"], args["spacing_m"],
                             args["speed_mps"], lanes=args.get("lanes", 1))
    path = net.write_network(grid, ctx.out_path(args.get("out", "network.json")))
    return _summary(ctx, grid, path)


def convert_osm(ctx, args):
    document = ctx.resolve(args["osm_file"]).read_text(encoding="utf-8")
    converted = net.convert_osm(document)
    path = net.write_network(converted, ctx.out_path(args.get("out", "network.json")))
    return _summary(ctx, converted, path)


def validate_network(ctx, args):
    loaded = net.read_network(ctx.resolve(args["network"]))
    diagnostics = net.validate_network(loaded)
    return {"valid": not diagnostics, "diagnostics": diagnostics}


HANDLERS = {
    "generate_grid": generate_grid,
    "convert_osm": convert_osm,
    "validate_network": validate_network,
}
