"""Static tool catalogue: descriptors only, no implementations.

This module is deliberately import-light. The registry consults it to
answer discovery queries without touching ``trafficmcp.tools.*``; the
implementation module for a sub-module is imported only when a client
asks for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Param:
    name: str
    type: str  # string | integer | number | boolean | array | object
    required: bool = False


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    module: str
    description: str
    parameters: tuple[Param, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "parameters": [{"name": p.name, "type": p.type, "required": p.required}
                           for p in self.parameters],
        }


@dataclass(frozen=True)
class ModuleSpec:
    name: str
    description: str
    tools: tuple[ToolDescriptor, ...] = field(default_factory=tuple)


def _tool(name, module, description, *params):
    return ToolDescriptor(name=name, module=module, description=description,
                          parameters=tuple(Param(*p) for p in params))


BASE_MODULE = "base"

BASE_TOOLS: tuple[ToolDescriptor, ...] = (
    _tool("get_module_description", BASE_MODULE,
          "Catalogue of sub-modules with status and tool names"),
    _tool("import_module", BASE_MODULE,
          "Import sub-modules so their tools become callable",
          ("names", "array", True)),
    _tool("workflow_sim_eval", BASE_MODULE,
          "End-to-end demand/simulation/comparison across signal strategies",
          ("grid", "object", False), ("region", "object", False),
          ("network", "string", False), ("random", "object", False),
          ("od", "object", False), ("strategies", "array", False),
          ("horizon_s", "number", True),
          ("progression_speed_mps", "number", False)),
    _tool("workflow_signal_opt", BASE_MODULE,
          "Baseline simulation, congestion detection, signal retiming, re-simulation",
          ("network", "string", True), ("od", "string", True),
          ("districts", "string", True), ("tls", "string", True),
          ("k", "integer", True), ("horizon_s", "number", True),
          ("progression_speed_mps", "number", False),
          ("seed", "integer", False)),
)


MODULES: dict[str, ModuleSpec] = {
    "network": ModuleSpec(
        "network",
        "Road-network synthesis, OSM conversion, and validation",
        (
            _tool("generate_grid", "network",
                  "Synthesize a rectangular grid network and write it as JSON",
                  ("rows", "integer", True), ("cols", "integer", True),
                  ("spacing_m", "number", True), ("speed_mps", "number", True),
                  ("lanes", "integer", False), ("out", "string", False)),
            _tool("convert_osm", "network",
                  "Convert an OSM XML extract into a network JSON file",
                  ("osm_file", "string", True), ("out", "string", False)),
            _tool("validate_network", "network",
                  "Run structural diagnostics over a network file",
                  ("network", "string", True)),
        ),
    ),
    "route": ModuleSpec(
        "route",
        "Demand generation and routing",
        (
            _tool("random_trips", "route",
                  "Seeded random trips weighted by edge length",
                  ("network", "string", True), ("count", "integer", True),
                  ("seed", "integer", True), ("begin_s", "number", True),
                  ("end_s", "number", True), ("out", "string", False)),
            _tool("od_to_trips", "route",
                  "Expand an OD matrix CSV into trips using district files",
                  ("od", "string", True), ("districts", "string", True),
                  ("seed", "integer", True), ("out", "string", False)),
            _tool("route_trips", "route",
                  "Shortest free-flow-time routes for a trip table",
                  ("network", "string", True), ("trips", "string", True),
                  ("out", "string", False)),
            _tool("turn_ratio_routes", "route",
                  "Walk inflow vehicles through turn ratios until they exit",
                  ("network", "string", True), ("ratios", "object", True),
                  ("inflows", "object", True), ("seed", "integer", True),
                  ("begin_s", "number", True), ("end_s", "number", True),
                  ("out_trips", "string", False), ("out_routes", "string", False)),
        ),
    ),
    "traffic_signal": ModuleSpec(
        "traffic_signal",
        "Signal plans: fixed, Webster, green-wave offsets, congestion tools",
        (
            _tool("fixed_plan", "traffic_signal",
                  "Equal-split plans for signalized junctions, written as CSV",
                  ("network", "string", True), ("cycle_s", "integer", False),
                  ("clearance_s", "integer", False), ("junctions", "array", False),
                  ("out", "string", False)),
            _tool("webster_plan", "traffic_signal",
                  "Webster-timed plans from approach flows in veh/h",
                  ("network", "string", True), ("flows", "object", True),
                  ("clearance_s", "integer", False), ("junctions", "array", False),
                  ("out", "string", False)),
            _tool("greenwave_offsets", "traffic_signal",
                  "Coordinate offsets along an arterial at a progression speed",
                  ("tls", "string", True), ("junctions", "array", True),
                  ("positions_m", "array", True),
                  ("progression_speed_mps", "number", True),
                  ("through_edges", "array", False), ("out", "string", False)),
            _tool("tls_to_csv", "traffic_signal",
                  "Convert a signal-plan JSON file to the CSV interchange format",
                  ("plans", "string", True), ("out", "string", False)),
            _tool("csv_to_tls", "traffic_signal",
                  "Parse a signal-plan CSV into the JSON plan format",
                  ("tls", "string", True), ("out", "string", False)),
            _tool("detect_congestion", "traffic_signal",
                  "Rank junctions by accumulated queue time",
                  ("sim_output", "string", True), ("k", "integer", True)),
            _tool("optimize_signals", "traffic_signal",
                  "Retime the most congested junctions from measured demand",
                  ("network", "string", True), ("sim_output", "string", True),
                  ("tls", "string", True), ("k", "integer", True),
                  ("progression_speed_mps", "number", False),
                  ("out", "string", False), ("out_changes", "string", False)),
        ),
    ),
    "detector": ModuleSpec(
        "detector",
        "Edge detector aggregation",
        (
            _tool("extract_detector_counts", "detector",
                  "Entered-vehicle counts per detector edge and interval",
                  ("sim_output", "string", True), ("edges", "array", True),
                  ("interval_s", "number", True)),
        ),
    ),
    "district": ModuleSpec(
        "district",
        "Origin/destination zone definitions",
        (
            _tool("define_districts", "district",
                  "Validate and persist district-to-edge assignments",
                  ("network", "string", True), ("assignments", "object", True),
                  ("out", "string", False)),
        ),
    ),
    "xml": ModuleSpec(
        "xml",
        "Network file reading, writing, and format conversion",
        (
            _tool("read_network", "xml",
                  "Load a network file and summarize its contents",
                  ("network", "string", True)),
            _tool("write_network", "xml",
                  "Write an inline network payload to a canonical JSON file",
                  ("network_data", "object", True), ("out", "string", True)),
            _tool("osm_to_network", "xml",
                  "File-to-file conversion from OSM XML to network JSON",
                  ("osm_file", "string", True), ("out", "string", False)),
        ),
    ),
    "import_tool": ModuleSpec(
        "import_tool",
        "External data acquisition",
        (
            _tool("osm_download", "import_tool",
                  "Fetch an OSM extract for a bbox or named area",
                  ("bbox", "array", False), ("place_name", "string", False),
                  ("endpoint", "string", False), ("timeout_s", "number", False)),
        ),
    ),
    "simulation": ModuleSpec(
        "simulation",
        "Deterministic point-queue traffic simulation",
        (
            _tool("run_simulation", "simulation",
                  "Run the queue model under static or actuated control",
                  ("network", "string", True), ("trips", "string", True),
                  ("routes", "string", True), ("end_s", "number", True),
                  ("step_s", "number", False), ("tls", "string", False),
                  ("control", "string", False),
                  ("detector_edges", "array", False),
                  ("detector_interval_s", "number", False),
                  ("out", "string", False)),
        ),
    ),
    "metrics": ModuleSpec(
        "metrics",
        "Post-processing: run metrics, comparison, improvement reports",
        (
            _tool("cal_metrics", "metrics",
                  "Aggregate a simulation output into headline averages",
                  ("sim_output", "string", True), ("out", "string", False)),
            _tool("compare_metrics", "metrics",
                  "Tabulate several metric reports and pick winners",
                  ("reports", "object", True), ("out_md", "string", False),
                  ("out_json", "string", False)),
            _tool("improvement_report", "metrics",
                  "Percent improvement between two metric reports",
                  ("before", "string", True), ("after", "string", True),
                  ("junctions", "array", True), ("change_log", "string", False),
                  ("out_md", "string", False), ("out_json", "string", False)),
        ),
    ),
}


def tool_index() -> dict[str, ToolDescriptor]:
    index: dict[str, ToolDescriptor] = {}
    for tool in BASE_TOOLS:
        index[tool.name] = tool
    for spec in MODULES.values():
        for tool in spec.tools:
            if tool.name in index:
                raise RuntimeError(f"duplicate tool name {tool.name}")
            index[tool.name] = tool
    return index
