"""Handlers for the xml sub-module (network file I/O and conversion)."""

from __future__ import annotations

from .. import network as net


def read_network(ctx, args):
    loaded = net.read_network(ctx.resolve(args["network"]))
    return {
        "nodes": len(loaded.nodes),
        "edges": len(loaded.edges),
        "signalized": sum(1 for n in loaded.nodes if n.signalized),
        "node_ids": [n.id for n in loaded.nodes][:50],
    }


def write_network(ctx, args):
    loaded = net.network_from_dict(args["network_data"])
    path = net.write_network(loaded, ctx.out_path(args["out"]))
    return {"path": ctx.display(path), "nodes": len(loaded.nodes),
            "edges": len(loaded.edges)}


def osm_to_network(ctx, args):
    document = ctx.resolve(args["osm_file"]).read_text(encoding="utf-8")
    converted = net.convert_osm(document)
    path = net.write_network(converted, ctx.out_path(args.get("out", "network.json")))
    return {"path": ctx.display(path), "nodes": len(converted.nodes),
            "edges": len(converted.edges)}


HANDLERS = {
    "read_network": read_network,
    "write_network": write_network,
    "osm_to_network": osm_to_network,
}
