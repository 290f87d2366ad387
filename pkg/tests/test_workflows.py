import json
from pathlib import Path

import pytest

from trafficmcp.errors import ToolError
from trafficmcp.osm import OfflineTransport, bundled_fixture_dir
from trafficmcp.registry import Registry

DATA = Path(__file__).resolve().parent / "data"
SCENARIO_5X5 = DATA / "scenario5x5"
SCENARIO_3X3 = DATA / "scenario3x3"


def opt_args(**overrides):
    args = {
        "network": str(SCENARIO_5X5 / "network.json"),
        "od": str(SCENARIO_5X5 / "od.csv"),
        "districts": str(SCENARIO_5X5 / "districts.json"),
        "tls": str(SCENARIO_5X5 / "tls_equal.csv"),
        "k": 4, "horizon_s": 3600.0, "progression_speed_mps": 12.5, "seed": 0,
    }
    args.update(overrides)
    return args


MANUAL_SEQUENCE = (
    "import_module", "csv_to_tls", "tls_to_csv", "od_to_trips", "route_trips",
    "run_simulation", "cal_metrics", "detect_congestion", "optimize_signals",
    "run_simulation", "cal_metrics", "improvement_report",
)


def compose_signal_opt_manually(registry, args, out_dir: str) -> None:
    """The workflow's constituent tool calls, issued one by one."""
    d = out_dir
    registry.call_tool("import_module",
                       {"names": ["route", "traffic_signal", "simulation", "metrics"]})
    registry.call_tool("csv_to_tls", {"tls": args["tls"],
                                      "out": f"{d}/plans_initial.json"})
    registry.call_tool("tls_to_csv", {"plans": f"{d}/plans_initial.json",
                                      "out": f"{d}/plans_initial.csv"})
    registry.call_tool("od_to_trips", {"od": args["od"], "districts": args["districts"],
                                       "seed": args["seed"], "out": f"{d}/trips.json"})
    registry.call_tool("route_trips", {"network": args["network"],
                                       "trips": f"{d}/trips.json",
                                       "out": f"{d}/routes.json"})
    registry.call_tool("run_simulation", {
        "network": args["network"], "trips": f"{d}/trips.json",
        "routes": f"{d}/routes.json", "end_s": args["horizon_s"],
        "tls": f"{d}/plans_initial.csv", "out": f"{d}/sim_before.json"})
    registry.call_tool("cal_metrics", {"sim_output": f"{d}/sim_before.json",
                                       "out": f"{d}/metrics_before.json"})
    ranking = registry.call_tool("detect_congestion",
                                 {"sim_output": f"{d}/sim_before.json",
                                  "k": args["k"]})["ranking"]
    registry.call_tool("optimize_signals", {
        "network": args["network"], "sim_output": f"{d}/sim_before.json",
        "tls": f"{d}/plans_initial.csv", "k": args["k"],
        "progression_speed_mps": args["progression_speed_mps"],
        "out": f"{d}/plans_optimized.csv", "out_changes": f"{d}/changes.json"})
    registry.call_tool("run_simulation", {
        "network": args["network"], "trips": f"{d}/trips.json",
        "routes": f"{d}/routes.json", "end_s": args["horizon_s"],
        "tls": f"{d}/plans_optimized.csv", "out": f"{d}/sim_after.json"})
    registry.call_tool("cal_metrics", {"sim_output": f"{d}/sim_after.json",
                                       "out": f"{d}/metrics_after.json"})
    registry.call_tool("improvement_report", {
        "before": f"{d}/metrics_before.json", "after": f"{d}/metrics_after.json",
        "junctions": [e["junction"] for e in ranking], "change_log": "changes.json",
        "out_md": f"{d}/report.md", "out_json": f"{d}/report.json"})


class TestSimEval:
    def test_grid_batch_is_structurally_complete(self, tmp_path):
        registry = Registry(workspace=tmp_path)
        result = registry.call_tool("workflow_sim_eval", {
            "grid": {"rows": 3, "cols": 3, "spacing_m": 200.0, "speed_mps": 13.9},
            "random": {"count": 500, "seed": 1},
            "strategies": ["fixed", "actuated", "webster", "greenwave"],
            "horizon_s": 3600.0,
        })
        for strategy in ("fixed", "actuated", "webster", "greenwave"):
            assert (tmp_path / result["artifacts"][f"sim_{strategy}"]).exists()
            assert (tmp_path / result["artifacts"][f"metrics_{strategy}"]).exists()
        assert set(result["best"]) == {"avg_travel_time_s", "avg_waiting_time_s",
                                       "avg_delay_s"}
        assert all(best in result["report"]["methods"]
                   for best in result["best"].values())

    def test_single_strategy_degenerates_with_warning(self, tmp_path):
        registry = Registry(workspace=tmp_path)
        result = registry.call_tool("workflow_sim_eval", {
            "grid": {"rows": 3, "cols": 3, "spacing_m": 200.0, "speed_mps": 13.9},
            "random": {"count": 50, "seed": 2},
            "strategies": ["fixed"],
            "horizon_s": 600.0,
        })
        assert result["best"] == {}
        assert any("single strategy" in note for note in result["notes"])
        assert list(result["report"]["methods"]) == ["fixed"]

    def test_paper_shaped_offline_region_run(self, tmp_path):
        registry = Registry(workspace=tmp_path,
                            osm_transport=OfflineTransport(bundled_fixture_dir()))
        result = registry.call_tool("workflow_sim_eval", {
            "region": {"place_name": "riverton"},
            "random": {"count": 5000, "seed": 7},
            "strategies": ["fixed", "actuated", "webster", "greenwave"],
            "horizon_s": 3600.0,
        })
        assert len(result["report"]["methods"]) == 4
        assert (tmp_path / result["artifacts"]["report_md"]).exists()
        tools_called = [s["tool"] for s in result["steps"]]
        assert "osm_download" in tools_called
        assert tools_called.count("run_simulation") == 4  # prelim + 3 others

    def test_requires_one_network_source(self, tmp_path):
        registry = Registry(workspace=tmp_path)
        with pytest.raises(ToolError) as err:
            registry.call_tool("workflow_sim_eval", {
                "random": {"count": 10, "seed": 1}, "horizon_s": 600.0})
        assert err.value.code == -32602

    def test_unknown_strategy_rejected(self, tmp_path):
        registry = Registry(workspace=tmp_path)
        with pytest.raises(ToolError):
            registry.call_tool("workflow_sim_eval", {
                "grid": {"rows": 3, "cols": 3, "spacing_m": 200.0, "speed_mps": 13.9},
                "random": {"count": 10, "seed": 1},
                "strategies": ["fixed", "psychic"], "horizon_s": 600.0})


class TestSignalOpt:
    def test_bundled_5x5_improves(self, tmp_path):
        registry = Registry(workspace=tmp_path)
        result = registry.call_tool("workflow_signal_opt", opt_args())
        assert len(result["selected_junctions"]) == 4
        report = result["report"]
        assert report["overall"]["avg_delay_s"] > 0
        for junction in result["selected_junctions"]:
            assert report["junctions"][junction]["queue_time_pct"] > 0
        initial = (tmp_path / result["artifacts"]["plans_initial"]).read_text()
        optimized = (tmp_path / result["artifacts"]["plans_optimized"]).read_text()
        assert initial != optimized
        changes = json.loads(
            (tmp_path / result["artifacts"]["changes"]).read_text())["changes"]
        retimed = {c["junction"] for c in changes if c.get("action") == "retimed"}
        assert retimed == set(result["selected_junctions"])

    def test_k_zero_is_noop(self, tmp_path):
        registry = Registry(workspace=tmp_path)
        result = registry.call_tool("workflow_signal_opt", opt_args(k=0))
        assert result["selected_junctions"] == []
        assert result["report"]["overall"] == {
            "avg_travel_time_s": 0.0, "avg_waiting_time_s": 0.0, "avg_delay_s": 0.0}
        initial = (tmp_path / result["artifacts"]["plans_initial"]).read_text()
        optimized = (tmp_path / result["artifacts"]["plans_optimized"]).read_text()
        assert initial == optimized

    def test_invalid_tls_csv_aborts_with_row(self, tmp_path):
        bad = tmp_path / "bad.csv"
        doc = (SCENARIO_5X5 / "tls_equal.csv").read_text().splitlines()
        doc[1] = doc[1].replace(",26", ",21", 1)  # durations no longer sum up
        bad.write_text("\n".join(doc) + "\n")
        registry = Registry(workspace=tmp_path)
        with pytest.raises(ToolError) as err:
            registry.call_tool("workflow_signal_opt", opt_args(tls=str(bad)))
        assert "row" in err.value.data
        assert err.value.data["steps"][-1]["status"] == "error"

    def test_deterministic_report_bytes(self, tmp_path):
        registry = Registry(workspace=tmp_path)
        first = registry.call_tool("workflow_signal_opt", opt_args())
        md = (tmp_path / first["artifacts"]["report_md"]).read_bytes()
        second = registry.call_tool("workflow_signal_opt", opt_args())
        assert first["run_dir"] == second["run_dir"]
        assert (tmp_path / second["artifacts"]["report_md"]).read_bytes() == md

    def test_step_log_complete_and_ordered(self, tmp_path):
        registry = Registry(workspace=tmp_path)
        result = registry.call_tool("workflow_signal_opt", opt_args())
        tools = [s["tool"] for s in result["steps"]]
        assert tools == list(MANUAL_SEQUENCE)
        assert all(s["status"] == "ok" and s["retries"] == 0
                   for s in result["steps"])

    def test_composition_equivalence(self, tmp_path):
        args = opt_args()
        registry = Registry(workspace=tmp_path)
        wf = registry.call_tool("workflow_signal_opt", args)
        wf_md = (tmp_path / wf["artifacts"]["report_md"]).read_bytes()
        wf_json = (tmp_path / wf["artifacts"]["report_json"]).read_bytes()

        manual = Registry(workspace=tmp_path)
        compose_signal_opt_manually(manual, args, "manual")
        assert (tmp_path / "manual/report.md").read_bytes() == wf_md
        assert (tmp_path / "manual/report.json").read_bytes() == wf_json


class TestRetryPolicy:
    def test_empty_osm_result_retries_with_larger_bbox(self, tmp_path):
        class ShyTransport:
            """Empty on the first (small) bbox, data once enlarged."""

            def __init__(self):
                self.bboxes = []

            def fetch(self, query):
                self.bboxes.append(query.bbox)
                if len(self.bboxes) == 1:
                    return "<osm version='0.6'></osm>"
                return (bundled_fixture_dir() / "riverton.osm.xml").read_text()

        transport = ShyTransport()
        registry = Registry(workspace=tmp_path, osm_transport=transport)
        result = registry.call_tool("workflow_sim_eval", {
            "region": {"bbox": [39.997, 115.999, 40.003, 116.009]},
            "random": {"count": 100, "seed": 3},
            "strategies": ["fixed"], "horizon_s": 600.0,
        })
        assert len(transport.bboxes) == 2
        first, second = transport.bboxes
        assert second[0] < first[0] and second[2] > first[2]
        download_step = next(s for s in result["steps"]
                             if s["tool"] == "osm_download")
        assert download_step["retries"] == 1
        assert download_step["status"] == "ok"

    def test_nonretryable_aborts_with_step_log(self, tmp_path):
        registry = Registry(workspace=tmp_path)
        with pytest.raises(ToolError) as err:
            registry.call_tool("workflow_signal_opt",
                               opt_args(od=str(SCENARIO_5X5 / "missing.csv")))
        assert "steps" in err.value.data
