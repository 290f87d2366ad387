"""Handlers for the metrics sub-module."""

from __future__ import annotations

import json

from .. import metrics as m
from ..errors import invalid_params
from ..simulator import read_sim_output


def cal_metrics(ctx, args):
    output = read_sim_output(ctx.resolve(args["sim_output"]))
    report = m.cal_metrics(output)
    payload = m.metrics_to_dict(report)
    result = {"report": payload}
    if "out" in args:
        path = m.write_metrics(report, ctx.out_path(args["out"]))
        result["path"] = ctx.display(path)
    return result


def _load_report(ctx, value):
    if isinstance(value, str):
        return m.read_metrics(ctx.resolve(value))
    if isinstance(value, dict):
        return m.metrics_from_dict(value)
    raise invalid_params("each report must be a file path or an inline object",
                         param="reports")


def compare_metrics(ctx, args):
    reports = {name: _load_report(ctx, value)
               for name, value in args["reports"].items()}
    comparison = m.compare_metrics(reports)
    payload = m.comparison_to_dict(comparison)
    result = {"comparison": payload, "best": comparison.best}
    if "out_md" in args:
        path = ctx.out_path(args["out_md"])
        path.write_text(comparison.markdown, encoding="utf-8")
        result["markdown_path"] = ctx.display(path)
    if "out_json" in args:
        path = ctx.out_path(args["out_json"])
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        result["json_path"] = ctx.display(path)
    return result


def improvement_report(ctx, args):
    before = _load_report(ctx, args["before"])
    after = _load_report(ctx, args["after"])
    report = m.improvement_report(before, after, list(args["junctions"]),
                                  change_log_ref=args.get("change_log", "changes.json"))
    payload = m.improvement_to_dict(report)
    result = {"improvement": payload}
    if "out_md" in args:
        path = ctx.out_path(args["out_md"])
        path.write_text(report.markdown, encoding="utf-8")
        result["markdown_path"] = ctx.display(path)
    if "out_json" in args:
        path = ctx.out_path(args["out_json"])
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        result["json_path"] = ctx.display(path)
    return result


HANDLERS = {
    "cal_metrics": cal_metrics,
    "compare_metrics": compare_metrics,
    "improvement_report": improvement_report,
}
