"""The two predefined composite workflows.

Both are implemented as sequences of ordinary tool calls through the
registry, so a client could reproduce either one step by step; the final
report of the optimization workflow is byte-identical to that manual
composition. Artifacts land in a run directory named by a digest of the
inputs (including referenced file contents), which makes reruns land on
identical paths and identical bytes.

A failed step is retried once: with the same arguments when the error is
flagged retryable, or with an adjusted argument set when a fixed
adjustment exists (currently: enlarge the bounding box by 20% when an
OSM download comes back empty).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .demand import read_trips
from .errors import ToolError, invalid_params
from .network import read_network, write_network
from .signals import find_chains
from .simulator import read_sim_output

STRATEGY_ORDER = ("fixed", "actuated", "webster", "greenwave")


def _args_digest(args: dict) -> str:
    return hashlib.sha256(
        json.dumps(args, sort_keys=True).encode("utf-8")).hexdigest()[:12]


def _inputs_digest(ctx, kind: str, args: dict) -> str:
    h = hashlib.sha256()
    h.update(kind.encode("utf-8"))
    h.update(json.dumps(args, sort_keys=True).encode("utf-8"))

    def visit(value):
        if isinstance(value, str):
            path = ctx.resolve(value)
            try:
                if path.is_file():
                    h.update(path.read_bytes())
            except OSError:
                pass
        elif isinstance(value, dict):
            for key in sorted(value):
                visit(value[key])
        elif isinstance(value, list):
            for item in value:
                visit(item)

    visit(args)
    return h.hexdigest()[:12]


def _adjusted_args(tool: str, err: ToolError, args: dict) -> dict | None:
    if tool == "osm_download" and err.data.get("hint") == "enlarge_bbox" \
            and args.get("bbox"):
        south, west, north, east = args["bbox"]
        lat_pad = (north - south) * 0.1
        lon_pad = (east - west) * 0.1
        adjusted = dict(args)
        adjusted["bbox"] = [south - lat_pad, west - lon_pad,
                            north + lat_pad, east + lon_pad]
        return adjusted
    return None


@dataclass
class _Run:
    ctx: object
    dir_name: str
    steps: list[dict] = field(default_factory=list)

    @property
    def run_dir(self) -> Path:
        return self.ctx.workspace / self.dir_name

    def rel(self, name: str) -> str:
        return f"{self.dir_name}/{name}"

    def call(self, tool: str, args: dict) -> dict:
        entry = {"tool": tool, "args_digest": _args_digest(args),
                 "status": "ok", "retries": 0}
        try:
            result = self.ctx.registry.call_tool(tool, args)
        except ToolError as err:
            adjusted = _adjusted_args(tool, err, args)
            if not err.data.get("retryable") and adjusted is None:
                entry["status"] = "error"
                self.steps.append(entry)
                self._abort(tool, err)
            entry["retries"] = 1
            try:
                result = self.ctx.registry.call_tool(tool, adjusted or args)
            except ToolError as err2:
                entry["status"] = "error"
                self.steps.append(entry)
                self._abort(tool, err2)
        self.steps.append(entry)
        return result

    def _abort(self, tool: str, err: ToolError) -> None:
        raise ToolError(f"workflow aborted at {tool}: {err.message}",
                        code=err.code, **{**err.data, "steps": self.steps})


def _require(condition: bool, message: str, **data) -> None:
    if not condition:
        raise invalid_params(message, **data)


# ---------------------------------------------------------------------------
# simulation generation & evaluation

def _acquire_network(run: _Run, args: dict) -> str:
    sources = [key for key in ("grid", "region", "network") if args.get(key)]
    _require(len(sources) == 1,
             f"choose exactly one network source (grid | region | network), got {sources}",
             param="network")
    out = run.rel("network.json")
    if args.get("grid"):
        grid = dict(args["grid"])
        grid["out"] = out
        run.call("generate_grid", grid)
    elif args.get("region"):
        region = dict(args["region"])
        download = run.call("osm_download", region)
        run.call("convert_osm", {"osm_file": download["path"], "out": out})
    else:
        loaded = read_network(run.ctx.resolve(args["network"]))
        run.run_dir.mkdir(parents=True, exist_ok=True)
        write_network(loaded, run.ctx.resolve(out))
    return out


def _generate_demand(run: _Run, args: dict, network: str, horizon: float) -> str:
    _require(bool(args.get("random")) != bool(args.get("od")),
             "choose exactly one demand source (random | od)", param="random")
    out = run.rel("trips.json")
    if args.get("random"):
        spec = args["random"]
        _require("count" in spec, "random demand needs a count", param="random")
        run.call("random_trips", {
            "network": network, "count": int(spec["count"]),
            "seed": int(spec.get("seed", 0)), "begin_s": 0.0, "end_s": horizon,
            "out": out})
    else:
        spec = args["od"]
        _require("od" in spec and "districts" in spec,
                 "od demand needs {od, districts}", param="od")
        run.call("od_to_trips", {"od": spec["od"], "districts": spec["districts"],
                                 "seed": int(spec.get("seed", 0)), "out": out})
    return out


def _measured_flows_vph(ctx, sim_path: str, horizon: float) -> dict[str, float]:
    output = read_sim_output(ctx.resolve(sim_path))
    flows: dict[str, float] = {}
    for counts in output.approach_arrivals.values():
        for edge, n in counts.items():
            flows[edge] = n / horizon * 3600.0
    return flows


def _best_flow_corridor(network, output) -> tuple[list[str], list[float], list, float] | None:
    """Chain of signalized junctions with the highest measured through flow."""
    junctions = network.signalized_nodes()
    chains = find_chains(network, junctions)
    if not chains:
        return None
    edge_between = {}
    for edge in network.edges:
        key = (edge.from_node, edge.to_node)
        if key not in edge_between or edge.id < edge_between[key].id:
            edge_between[key] = edge

    def weight(chain):
        total = 0
        for prev, here in zip(chain, chain[1:]):
            edge = edge_between[(prev, here)]
            total += output.approach_arrivals.get(here, {}).get(edge.id, 0)
        return total

    chains.sort(key=lambda c: (-weight(c), -len(c), c))
    chain = chains[0]
    positions = [0.0]
    through: list[str | None] = [None]
    speeds = []
    for prev, here in zip(chain, chain[1:]):
        edge = edge_between[(prev, here)]
        positions.append(positions[-1] + edge.length_m)
        through.append(edge.id)
        speeds.append(edge.speed_mps)
    return chain, positions, through, min(speeds)


def run_sim_eval(ctx, args: dict) -> dict:
    strategies = args.get("strategies") or list(STRATEGY_ORDER)
    unknown = [s for s in strategies if s not in STRATEGY_ORDER]
    _require(not unknown, f"unknown strategies {unknown}", param="strategies")
    _require(len(strategies) > 0, "at least one strategy required", param="strategies")
    strategies = [s for s in STRATEGY_ORDER if s in strategies]
    horizon = float(args["horizon_s"])
    _require(horizon > 0, "horizon_s must be positive", param="horizon_s")

    run = _Run(ctx, f"run_eval_{_inputs_digest(ctx, 'sim_eval', args)}")
    modules = ["network", "route", "traffic_signal", "simulation", "metrics"]
    if args.get("region"):
        modules.insert(0, "import_tool")
    run.call("import_module", {"names": modules})

    network_path = _acquire_network(run, args)
    trips_path = _generate_demand(run, args, network_path, horizon)
    routing = run.call("route_trips", {"network": network_path, "trips": trips_path,
                                       "out": run.rel("routes.json")})
    if routing["failures"]:
        raise ToolError(f"{len(routing['failures'])} trips could not be routed",
                        failures=routing["failures"][:10], steps=run.steps)
    routes_path = run.rel("routes.json")

    # preliminary equal-split run: the fixed strategy itself, and the flow
    # measurement Webster feeds on
    run.call("fixed_plan", {"network": network_path, "out": run.rel("plans_fixed.csv")})
    run.call("run_simulation", {
        "network": network_path, "trips": trips_path, "routes": routes_path,
        "end_s": horizon, "tls": run.rel("plans_fixed.csv"),
        "out": run.rel("sim_fixed.json")})

    artifacts = {"network": network_path, "trips": trips_path, "routes": routes_path,
                 "plans_fixed": run.rel("plans_fixed.csv"),
                 "sim_fixed": run.rel("sim_fixed.json")}
    notes: list[str] = []

    def ensure_webster_plans() -> str:
        path = run.rel("plans_webster.csv")
        if "plans_webster" not in artifacts:
            flows = _measured_flows_vph(ctx, run.rel("sim_fixed.json"), horizon)
            run.call("webster_plan", {"network": network_path, "flows": flows,
                                      "out": path})
            artifacts["plans_webster"] = path
        return path

    metric_files: dict[str, str] = {}
    for strategy in strategies:
        if strategy == "fixed":
            sim_path = run.rel("sim_fixed.json")
        elif strategy == "actuated":
            sim_path = run.rel("sim_actuated.json")
            run.call("run_simulation", {
                "network": network_path, "trips": trips_path, "routes": routes_path,
                "end_s": horizon, "control": "actuated", "out": sim_path})
        elif strategy == "webster":
            sim_path = run.rel("sim_webster.json")
            run.call("run_simulation", {
                "network": network_path, "trips": trips_path, "routes": routes_path,
                "end_s": horizon, "tls": ensure_webster_plans(), "out": sim_path})
        else:  # greenwave
            webster_csv = ensure_webster_plans()
            plans_path = run.rel("plans_greenwave.csv")
            corridor = _best_flow_corridor(
                read_network(ctx.resolve(network_path)),
                read_sim_output(ctx.resolve(run.rel("sim_fixed.json"))))
            if corridor is None:
                notes.append("no corridor of adjacent signals; green wave "
                             "falls back to Webster timing")
                Path(ctx.resolve(plans_path)).write_bytes(
                    ctx.resolve(webster_csv).read_bytes())
            else:
                chain, positions, through, speed = corridor
                run.call("greenwave_offsets", {
                    "tls": webster_csv, "junctions": chain,
                    "positions_m": positions,
                    "progression_speed_mps": args.get("progression_speed_mps", speed),
                    "through_edges": ["" if t is None else t for t in through],
                    "out": plans_path})
            artifacts["plans_greenwave"] = plans_path
            sim_path = run.rel("sim_greenwave.json")
            run.call("run_simulation", {
                "network": network_path, "trips": trips_path, "routes": routes_path,
                "end_s": horizon, "tls": plans_path, "out": sim_path})
        artifacts[f"sim_{strategy}"] = sim_path
        metrics_path = run.rel(f"metrics_{strategy}.json")
        run.call("cal_metrics", {"sim_output": sim_path, "out": metrics_path})
        metric_files[strategy] = metrics_path
        artifacts[f"metrics_{strategy}"] = metrics_path

    report_json = run.rel("report.json")
    report_md = run.rel("report.md")
    if len(metric_files) >= 2:
        comparison = run.call("compare_metrics", {
            "reports": dict(metric_files), "out_md": report_md,
            "out_json": report_json})
        report = comparison["comparison"]
        best = comparison["best"]
    else:
        notes.append("single strategy requested; nothing to compare")
        (strategy, metrics_path), = metric_files.items()
        payload = json.loads(ctx.resolve(metrics_path).read_text(encoding="utf-8"))
        report = {"methods": {strategy: {k: payload[k] for k in
                                         ("avg_travel_time_s", "avg_waiting_time_s",
                                          "avg_delay_s")}},
                  "best": {}, "warnings": notes}
        ctx.resolve(report_json).write_text(json.dumps(report, indent=2) + "\n",
                                            encoding="utf-8")
        ctx.resolve(report_md).write_text(
            "# Strategy Comparison\n\nOnly one strategy was simulated; "
            "no comparison possible.\n", encoding="utf-8")
        best = {}
    artifacts["report_json"] = report_json
    artifacts["report_md"] = report_md

    return {"run_dir": run.dir_name, "artifacts": artifacts, "steps": run.steps,
            "strategies": strategies, "best": best, "report": report,
            "notes": notes}


# ---------------------------------------------------------------------------
# signal-control optimization

def run_signal_opt(ctx, args: dict) -> dict:
    horizon = float(args["horizon_s"])
    _require(horizon > 0, "horizon_s must be positive", param="horizon_s")
    k = args["k"]
    _require(k >= 0, "k must be non-negative", param="k")
    speed = args.get("progression_speed_mps", 12.0)
    seed = int(args.get("seed", 0))

    run = _Run(ctx, f"run_opt_{_inputs_digest(ctx, 'signal_opt', args)}")
    run.call("import_module",
             {"names": ["route", "traffic_signal", "simulation", "metrics"]})

    network_path = args["network"]

    # canonicalize the initial plans (and fail fast on malformed CSV)
    run.call("csv_to_tls", {"tls": args["tls"], "out": run.rel("plans_initial.json")})
    run.call("tls_to_csv", {"plans": run.rel("plans_initial.json"),
                            "out": run.rel("plans_initial.csv")})

    run.call("od_to_trips", {"od": args["od"], "districts": args["districts"],
                             "seed": seed, "out": run.rel("trips.json")})
    routing = run.call("route_trips", {"network": network_path,
                                       "trips": run.rel("trips.json"),
                                       "out": run.rel("routes.json")})
    if routing["failures"]:
        raise ToolError(f"{len(routing['failures'])} trips could not be routed",
                        failures=routing["failures"][:10], steps=run.steps)

    before = run.call("run_simulation", {
        "network": network_path, "trips": run.rel("trips.json"),
        "routes": run.rel("routes.json"), "end_s": horizon,
        "tls": run.rel("plans_initial.csv"), "out": run.rel("sim_before.json")})
    if before["totals"]["inserted"] == 0:
        raise ToolError("baseline simulation inserted no vehicles; "
                        "check the OD matrix time windows", steps=run.steps)

    run.call("cal_metrics", {"sim_output": run.rel("sim_before.json"),
                             "out": run.rel("metrics_before.json")})
    ranking = run.call("detect_congestion", {"sim_output": run.rel("sim_before.json"),
                                             "k": k})["ranking"]
    selected = [entry["junction"] for entry in ranking]

    run.call("optimize_signals", {
        "network": network_path, "sim_output": run.rel("sim_before.json"),
        "tls": run.rel("plans_initial.csv"), "k": k,
        "progression_speed_mps": speed,
        "out": run.rel("plans_optimized.csv"),
        "out_changes": run.rel("changes.json")})

    run.call("run_simulation", {
        "network": network_path, "trips": run.rel("trips.json"),
        "routes": run.rel("routes.json"), "end_s": horizon,
        "tls": run.rel("plans_optimized.csv"), "out": run.rel("sim_after.json")})
    run.call("cal_metrics", {"sim_output": run.rel("sim_after.json"),
                             "out": run.rel("metrics_after.json")})

    improvement = run.call("improvement_report", {
        "before": run.rel("metrics_before.json"),
        "after": run.rel("metrics_after.json"),
        "junctions": selected, "change_log": "changes.json",
        "out_md": run.rel("report.md"), "out_json": run.rel("report.json")})

    artifacts = {
        "plans_initial": run.rel("plans_initial.csv"),
        "plans_optimized": run.rel("plans_optimized.csv"),
        "changes": run.rel("changes.json"),
        "trips": run.rel("trips.json"), "routes": run.rel("routes.json"),
        "sim_before": run.rel("sim_before.json"),
        "sim_after": run.rel("sim_after.json"),
        "metrics_before": run.rel("metrics_before.json"),
        "metrics_after": run.rel("metrics_after.json"),
        "report_md": run.rel("report.md"), "report_json": run.rel("report.json"),
    }
    return {"run_dir": run.dir_name, "artifacts": artifacts, "steps": run.steps,
            "selected_junctions": selected, "ranking": ranking,
            "report": improvement["improvement"]}
