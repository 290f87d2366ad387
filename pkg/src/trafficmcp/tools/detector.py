"""Handlers for the detector sub-module."""

from __future__ import annotations

from ..simulator import extract_detector_counts as _extract
from ..simulator import read_sim_output


def extract_detector_counts(ctx, args):
    output = read_sim_output(ctx.resolve(args["sim_output"]))
    counts = _extract(output, list(args["edges"]), args["interval_s"])
    return {"interval_s": args["interval_s"], "counts": counts}


HANDLERS = {"extract_detector_counts": extract_detector_counts}
