#!/usr/bin/env python3
"""Record golden values for the regression-style acceptance checks.

Runs the two bundled scenarios through the real pipeline and freezes the
resulting margins into tests/data/goldens.json. The acceptance suite
re-runs both scenarios and asserts the recomputed values stay within 5%
relative of these records, so a semantics change that shifts results gets
noticed even when directions stay correct.

Usage: python scripts/record_goldens.py
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from trafficmcp.registry import Registry

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"


def eval_3x3(workspace: Path) -> dict:
    registry = Registry(workspace=workspace)
    scenario = DATA / "scenario3x3"
    result = registry.call_tool("workflow_sim_eval", {
        "network": str(scenario / "network.json"),
        "od": {"od": str(scenario / "od.csv"),
               "districts": str(scenario / "districts.json"), "seed": 0},
        "strategies": ["fixed", "webster"],
        "horizon_s": 3600.0,
    })
    methods = result["report"]["methods"]
    fixed_delay = methods["fixed"]["avg_delay_s"]
    webster_delay = methods["webster"]["avg_delay_s"]
    return {
        "fixed_avg_delay_s": fixed_delay,
        "webster_avg_delay_s": webster_delay,
        "delay_margin_s": fixed_delay - webster_delay,
    }


def opt_5x5(workspace: Path) -> dict:
    registry = Registry(workspace=workspace)
    scenario = DATA / "scenario5x5"
    result = registry.call_tool("workflow_signal_opt", {
        "network": str(scenario / "network.json"),
        "od": str(scenario / "od.csv"),
        "districts": str(scenario / "districts.json"),
        "tls": str(scenario / "tls_equal.csv"),
        "k": 4, "horizon_s": 3600.0, "progression_speed_mps": 12.5, "seed": 0,
    })
    report = result["report"]
    return {
        "selected_junctions": result["selected_junctions"],
        "overall": report["overall"],
        "queue_time_pct": {j: vals["queue_time_pct"]
                           for j, vals in report["junctions"].items()},
    }


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        goldens = {
            "scenario3x3": eval_3x3(Path(tmp) / "eval"),
            "scenario5x5": opt_5x5(Path(tmp) / "opt"),
        }
    out = DATA / "goldens.json"
    out.write_text(json.dumps(goldens, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(goldens, indent=2))
    print(f"\nwritten to {out}")


if __name__ == "__main__":
    main()
