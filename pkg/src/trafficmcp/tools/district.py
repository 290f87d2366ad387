"""Handlers for the district sub-module."""

from __future__ import annotations

from ..network import define_districts as _define
from ..network import read_network, write_districts


def define_districts(ctx, args):
    net = read_network(ctx.resolve(args["network"]))
    districts = _define(net, {d: list(e) for d, e in args["assignments"].items()})
    path = write_districts(districts, ctx.out_path(args.get("out", "districts.json")))
    return {"path": ctx.display(path), "districts": sorted(districts.districts)}


HANDLERS = {"define_districts": define_districts}
