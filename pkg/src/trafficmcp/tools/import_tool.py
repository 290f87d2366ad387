"""Handlers for the import_tool sub-module (external acquisition)."""

from __future__ import annotations

from ..errors import invalid_params
from ..osm import DEFAULT_ENDPOINT, RegionQuery, osm_download as _download

import os


def osm_download(ctx, args):
    bbox = args.get("bbox")
    place = args.get("place_name")
    if bbox is not None:
        if len(bbox) != 4:
            raise invalid_params("bbox must be [south, west, north, east]",
                                 param="bbox")
        bbox = tuple(float(v) for v in bbox)
    query = RegionQuery(
        bbox=bbox, place_name=place,
        endpoint=args.get("endpoint",
                          os.environ.get("TRAFFICMCP_OSM_ENDPOINT", DEFAULT_ENDPOINT)),
        timeout_s=args.get("timeout_s", 30.0))
    document, path = _download(query, ctx.workspace, transport=ctx.osm_transport)
    return {"path": ctx.display(path), "region": query.region_name,
            "bytes": len(document.encode("utf-8"))}


HANDLERS = {"osm_download": osm_download}
