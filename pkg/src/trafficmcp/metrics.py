"""Post-processing: per-run metrics, cross-strategy comparison, and the
before/after improvement report.

Averages cover finished vehicles only; unfinished trips are counted and
disclosed instead of silently skewing the means. Reports come in two
forms: a machine-readable dict (the tested surface) and a Markdown
rendering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import invalid_params
from .simulator import SimOutput

METRIC_KEYS = ("avg_travel_time_s", "avg_waiting_time_s", "avg_delay_s")
METRIC_LABELS = {
    "avg_travel_time_s": "Avg Travel Time (s)",
    "avg_waiting_time_s": "Avg Waiting Time (s/veh)",
    "avg_delay_s": "Avg Delay (s/veh)",
}


@dataclass
class JunctionStats:
    queue_time_vehs: float
    max_queue_veh: int


@dataclass
class MetricsReport:
    avg_travel_time_s: float | None
    avg_waiting_time_s: float | None
    avg_delay_s: float | None
    finished: int
    unfinished: int
    per_junction: dict[str, JunctionStats] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def metric(self, key: str) -> float | None:
        return getattr(self, key)


def cal_metrics(output: SimOutput) -> MetricsReport:
    """Aggregate a simulation run into the three headline averages."""
    finished = [r for r in output.vehicles if r.arrive_s is not None]
    unfinished = len(output.vehicles) - len(finished)
    warnings = []
    if finished:
        n = len(finished)
        avg_travel = sum(r.arrive_s - r.depart_s for r in finished) / n
        avg_wait = sum(r.waiting_s for r in finished) / n
        avg_delay = sum(r.arrive_s - r.depart_s - r.freeflow_s for r in finished) / n
    else:
        avg_travel = avg_wait = avg_delay = None
        warnings.append("no finished vehicles; averages unavailable")
    if unfinished:
        warnings.append(f"{unfinished} vehicles still active at the horizon")

    per_junction = {}
    for junction in sorted(output.junction_queues):
        series = output.junction_queues[junction]
        queue_time = sum(sum(counts) for counts in series.values()) * output.step_s
        max_queue = max((max(counts) for counts in series.values() if counts), default=0)
        per_junction[junction] = JunctionStats(queue_time_vehs=queue_time,
                                               max_queue_veh=max_queue)
    return MetricsReport(avg_travel_time_s=avg_travel, avg_waiting_time_s=avg_wait,
                         avg_delay_s=avg_delay, finished=len(finished),
                         unfinished=unfinished, per_junction=per_junction,
                         warnings=warnings)


# ---------------------------------------------------------------------------
# comparison

@dataclass
class ComparisonReport:
    methods: dict[str, MetricsReport]
    best: dict[str, str | None]
    markdown: str


def compare_metrics(reports: dict[str, MetricsReport]) -> ComparisonReport:
    """Best method per metric is the argmin; ties go to the smaller name."""
    if len(reports) < 2:
        raise invalid_params("comparison needs at least two reports", param="reports")
    best: dict[str, str | None] = {}
    for key in METRIC_KEYS:
        candidates = [(rep.metric(key), name) for name, rep in reports.items()
                      if rep.metric(key) is not None]
        best[key] = min(candidates)[1] if candidates else None

    lines = ["# Strategy Comparison", ""]
    lines.append("| Method | " + " | ".join(METRIC_LABELS[k] for k in METRIC_KEYS) + " |")
    lines.append("|---|---|---|---|")
    for name in sorted(reports):
        rep = reports[name]
        cells = [f"{rep.metric(k):.2f}" if rep.metric(k) is not None else "n/a"
                 for k in METRIC_KEYS]
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    lines.append("")
    for key in METRIC_KEYS:
        lines.append(f"- best {METRIC_LABELS[key]}: {best[key] or 'n/a'}")
    lines.append("")
    return ComparisonReport(methods=dict(reports), best=best,
                            markdown="\n".join(lines))


def comparison_to_dict(report: ComparisonReport) -> dict:
    return {
        "methods": {name: {k: rep.metric(k) for k in METRIC_KEYS}
                    for name, rep in sorted(report.methods.items())},
        "best": {k: report.best[k] for k in METRIC_KEYS},
    }


# ---------------------------------------------------------------------------
# improvement

def _pct(before: float | None, after: float | None) -> float | None:
    if before is None or after is None or before <= 0:
        return None
    return (before - after) / before * 100.0


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.2f}"


@dataclass
class ImprovementReport:
    overall: dict[str, float | None]
    junctions: dict[str, dict[str, float | None]]
    change_log_ref: str
    markdown: str


def improvement_report(before: MetricsReport, after: MetricsReport,
                       junctions: list[str],
                       change_log_ref: str = "changes.json") -> ImprovementReport:
    """Percent improvement, (before - after) / before * 100.

    Regressions show up negative; cells with a zero or missing baseline
    render as "n/a".
    """
    for junction in junctions:
        for which, rep in (("before", before), ("after", after)):
            if junction not in rep.per_junction:
                raise invalid_params(
                    f"junction {junction} missing from the {which} report",
                    junction=junction)
    overall = {key: _pct(before.metric(key), after.metric(key)) for key in METRIC_KEYS}
    per_junction: dict[str, dict[str, float | None]] = {}
    for junction in junctions:
        b = before.per_junction[junction]
        a = after.per_junction[junction]
        per_junction[junction] = {
            "queue_time_pct": _pct(b.queue_time_vehs, a.queue_time_vehs),
            "max_queue_pct": _pct(float(b.max_queue_veh), float(a.max_queue_veh)),
        }

    lines = ["# Optimization Report", ""]
    lines.append("| Category | Metric | Improvement (%) |")
    lines.append("|---|---|---|")
    for key, label in (("avg_travel_time_s", "Average Travel Time"),
                       ("avg_waiting_time_s", "Average Waiting Time"),
                       ("avg_delay_s", "Average Delay")):
        lines.append(f"| Overall | {label} | {_fmt(overall[key])} |")
    for junction in junctions:
        row = per_junction[junction]
        lines.append(f"| {junction} | Queue Time | {_fmt(row['queue_time_pct'])} |")
        lines.append(f"| {junction} | Max Queue Length | {_fmt(row['max_queue_pct'])} |")
    lines.append("")
    lines.append(f"Signal changes: {change_log_ref}")
    lines.append("")
    return ImprovementReport(overall=overall, junctions=per_junction,
                             change_log_ref=change_log_ref,
                             markdown="\n".join(lines))


def improvement_to_dict(report: ImprovementReport) -> dict:
    return {
        "overall": dict(report.overall),
        "junctions": {j: dict(v) for j, v in report.junctions.items()},
        "change_log": report.change_log_ref,
    }


# ---------------------------------------------------------------------------
# report files

def metrics_to_dict(report: MetricsReport) -> dict:
    return {
        "avg_travel_time_s": report.avg_travel_time_s,
        "avg_waiting_time_s": report.avg_waiting_time_s,
        "avg_delay_s": report.avg_delay_s,
        "finished": report.finished,
        "unfinished": report.unfinished,
        "per_junction": {j: {"queue_time_vehs": s.queue_time_vehs,
                             "max_queue_veh": s.max_queue_veh}
                         for j, s in sorted(report.per_junction.items())},
        "warnings": list(report.warnings),
    }


def metrics_from_dict(payload: dict) -> MetricsReport:
    try:
        return MetricsReport(
            avg_travel_time_s=payload["avg_travel_time_s"],
            avg_waiting_time_s=payload["avg_waiting_time_s"],
            avg_delay_s=payload["avg_delay_s"],
            finished=int(payload["finished"]),
            unfinished=int(payload["unfinished"]),
            per_junction={j: JunctionStats(queue_time_vehs=float(s["queue_time_vehs"]),
                                           max_queue_veh=int(s["max_queue_veh"]))
                          for j, s in payload["per_junction"].items()},
            warnings=list(payload.get("warnings", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise invalid_params(f"bad metrics payload: {exc}", param="metrics") from exc


def write_metrics(report: MetricsReport, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(metrics_to_dict(report), indent=2) + "\n",
                    encoding="utf-8")
    return path


def read_metrics(path: str | Path) -> MetricsReport:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise invalid_params(f"metrics file {path} is not valid JSON: {exc}",
                             param="metrics") from exc
    return metrics_from_dict(payload)
