"""Two-stage region ranking: geographic prefilter, then latency/RTT scoring.

Stage one ranks every candidate region by total great-circle distance over
the candidate graph and keeps the top n. Stage two scores each survivor as
the average of its summed HTTP round-trip and summed network latency. All
tables are ordinal: scores order regions but do not predict run times.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .candidate import build_candidate_graph, total_weight
from .errors import RegionRankError
from .metrics import FAILURE_SENTINEL_MS, MetricMatrix
from .regions import Region, RegionCatalog
from .workflow import WorkflowSpec

DEFAULT_PREFILTER_N = 3

Table = tuple[tuple[str, float], ...]


class ReportError(RegionRankError):
    """A rendered report could not be parsed back."""


@dataclass(frozen=True)
class RankingReport:
    """Outcome of one ranking run.

    prefilter_n is the effective survivor count (requested n capped at the
    catalog size); distance_table covers every region while the latency, rtt
    and final tables cover only prefilter survivors. Every table is sorted
    ascending by (score, region-id).
    """

    recommended: str
    prefilter_n: int
    prefiltered_regions: tuple[str, ...]
    distance_table: Table
    latency_table: Table
    rtt_table: Table
    final_table: Table

    def __post_init__(self):
        object.__setattr__(self, "prefiltered_regions", tuple(self.prefiltered_regions))
        for name in ("distance_table", "latency_table", "rtt_table", "final_table"):
            table = tuple((str(r), float(s)) for r, s in getattr(self, name))
            object.__setattr__(self, name, table)


def _sorted_table(scores: dict[str, float]) -> Table:
    return tuple(sorted(scores.items(), key=lambda item: (item[1], item[0])))


def _distance_table(spec: WorkflowSpec, catalog: RegionCatalog, matrix: MetricMatrix,
                    sentinel: float) -> Table:
    scores = {
        region.id: total_weight(build_candidate_graph(spec, region), "distance", matrix, sentinel)
        for region in catalog
    }
    return _sorted_table(scores)


def geo_prefilter(
    spec: WorkflowSpec,
    catalog: RegionCatalog,
    matrix: MetricMatrix,
    n: int,
    sentinel: float = FAILURE_SENTINEL_MS,
) -> list[Region]:
    """Top n regions by total geographic distance (ascending, ties by id)."""
    if n < 1:
        raise ValueError("prefilter size must be at least 1")
    table = _distance_table(spec, catalog, matrix, sentinel)
    return [catalog.by_id(region_id) for region_id, _ in table[: min(n, len(catalog))]]


def rank(
    spec: WorkflowSpec,
    catalog: RegionCatalog,
    matrix: MetricMatrix,
    n: int = DEFAULT_PREFILTER_N,
    sentinel: float = FAILURE_SENTINEL_MS,
) -> RankingReport:
    """Rank candidate regions for hosting the workflow orchestrator.

    The recommendation is the argmin of final_score = (total rtt +
    total latency) / 2 over prefilter survivors, ties broken by region id.
    """
    if n < 1:
        raise ValueError("prefilter size must be at least 1")
    distance_table = _distance_table(spec, catalog, matrix, sentinel)
    effective_n = min(n, len(catalog))
    survivors = [catalog.by_id(region_id) for region_id, _ in distance_table[:effective_n]]

    latency_scores, rtt_scores, final_scores = {}, {}, {}
    for region in survivors:
        graph = build_candidate_graph(spec, region)
        latency = total_weight(graph, "latency", matrix, sentinel)
        rtt = total_weight(graph, "rtt", matrix, sentinel)
        latency_scores[region.id] = latency
        rtt_scores[region.id] = rtt
        final_scores[region.id] = (rtt + latency) / 2.0

    final_table = _sorted_table(final_scores)
    return RankingReport(
        recommended=final_table[0][0],
        prefilter_n=effective_n,
        prefiltered_regions=tuple(region.id for region in survivors),
        distance_table=distance_table,
        latency_table=_sorted_table(latency_scores),
        rtt_table=_sorted_table(rtt_scores),
        final_table=final_table,
    )


def _render_rows(table: Table, header: str) -> list[str]:
    lines = [header]
    for region_id, score in table:
        lines.append(f"{region_id} | {score:.3f}")
    return lines


def render_report(report: RankingReport, format: str = "table") -> str:
    """Render a report as a human table or as machine-readable JSON.

    Table scores are ordinal; units: final/latency/rtt in milliseconds summed
    over candidate edges, distance in kilometres.
    """
    if format == "table":
        lines = ["# scores are ordinal; final/latency/rtt in ms, distance in km"]
        lines += _render_rows(report.final_table, "EC2 endpoint | final score")
        lines.append("")
        lines += _render_rows(report.distance_table, "EC2 endpoint | distance score (km)")
        lines.append("")
        lines += _render_rows(report.latency_table, "EC2 endpoint | latency score (ms)")
        lines.append("")
        lines += _render_rows(report.rtt_table, "EC2 endpoint | rtt score (ms)")
        return "\n".join(lines) + "\n"
    if format == "json":
        doc = {
            "recommended": report.recommended,
            "prefilter_n": report.prefilter_n,
            "distance_table": [list(row) for row in report.distance_table],
            "latency_table": [list(row) for row in report.latency_table],
            "rtt_table": [list(row) for row in report.rtt_table],
            "final_table": [list(row) for row in report.final_table],
        }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def parse_report(text: str) -> RankingReport:
    """Inverse of render_report(..., "json")."""
    try:
        doc = json.loads(text)
        recommended = str(doc["recommended"])
        prefilter_n = int(doc["prefilter_n"])
        tables = {
            name: tuple((str(r), float(s)) for r, s in doc[name])
            for name in ("distance_table", "latency_table", "rtt_table", "final_table")
        }
    except (json.JSONDecodeError, TypeError, KeyError, ValueError) as exc:
        raise ReportError(f"malformed report: {exc}") from exc
    prefiltered = tuple(region_id for region_id, _ in tables["distance_table"][:prefilter_n])
    return RankingReport(
        recommended=recommended,
        prefilter_n=prefilter_n,
        prefiltered_regions=prefiltered,
        distance_table=tables["distance_table"],
        latency_table=tables["latency_table"],
        rtt_table=tables["rtt_table"],
        final_table=tables["final_table"],
    )
