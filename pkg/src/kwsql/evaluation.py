"""Golden standards and ranking metrics: recall, recall at K, max recall
position, and mean reciprocal rank.

Each query has exactly one relevant query match and one relevant network;
relevance comparison is canonical-string equality. Lists shorter than K are
judged at their last result, so a short list containing its relevant item
always counts as a hit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

R_AT_K_RANGE = range(1, 11)


@dataclass(frozen=True)
class GoldenStandard:
    query: str
    relevant_qm: str
    relevant_cjn: str


def load_gold(path: str | Path) -> list[GoldenStandard]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list) or not data:
        raise ValueError(f"gold file {path} must be a non-empty JSON array")
    out = []
    for i, entry in enumerate(data):
        try:
            out.append(GoldenStandard(entry["query"], entry["relevant_qm"],
                                      entry["relevant_cjn"]))
        except (TypeError, KeyError) as exc:
            raise ValueError(f"gold entry {i} is malformed: {exc}") from exc
    return out


@dataclass
class QueryRun:
    """Ranked canonical forms produced for one query."""

    qms: list[str]
    cjns: list[str]


@dataclass
class MetricReport:
    mrr: float
    recall: float
    r_at_k: dict[int, float]
    max_recall_position: int | None

    def to_dict(self) -> dict:
        return {"mrr": self.mrr, "recall": self.recall,
                "r_at_k": {str(k): v for k, v in sorted(self.r_at_k.items())},
                "max_recall_position": self.max_recall_position}


def _position(ranked: list[str], relevant: str) -> int | None:
    """1-based rank of the relevant item, None if absent."""
    try:
        return ranked.index(relevant) + 1
    except ValueError:
        return None


def reciprocal_rank(ranked: list[str], relevant: str) -> float:
    pos = _position(ranked, relevant)
    return 0.0 if pos is None else 1.0 / pos


def r_at_k(per_query_ranked: list[list[str]], relevants: list[str], k: int) -> float:
    """Fraction of queries whose relevant item appears within
    min(k, list length) positions."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not per_query_ranked:
        return 0.0
    hits = 0
    for ranked, relevant in zip(per_query_ranked, relevants):
        pos = _position(ranked, relevant)
        if pos is not None and pos <= min(k, len(ranked)):
            hits += 1
    return hits / len(per_query_ranked)


def max_recall_position(per_query_ranked: list[list[str]],
                        relevants: list[str]) -> int | None:
    """Deepest rank at which any query's relevant item sits; queries that
    never recall it are excluded (they show up in recall instead)."""
    positions = [p for ranked, relevant in zip(per_query_ranked, relevants)
                 if (p := _position(ranked, relevant)) is not None]
    return max(positions) if positions else None


def recall(per_query_ranked: list[list[str]], relevants: list[str]) -> float:
    if not per_query_ranked:
        return 0.0
    found = sum(1 for ranked, relevant in zip(per_query_ranked, relevants)
                if _position(ranked, relevant) is not None)
    return found / len(per_query_ranked)


def mean_reciprocal_rank(per_query_ranked: list[list[str]],
                         relevants: list[str]) -> float:
    if not per_query_ranked:
        return 0.0
    return sum(reciprocal_rank(r, rel)
               for r, rel in zip(per_query_ranked, relevants)) / len(per_query_ranked)


def _report(per_query_ranked: list[list[str]], relevants: list[str]) -> MetricReport:
    return MetricReport(
        mrr=mean_reciprocal_rank(per_query_ranked, relevants),
        recall=recall(per_query_ranked, relevants),
        r_at_k={k: r_at_k(per_query_ranked, relevants, k) for k in R_AT_K_RANGE},
        max_recall_position=max_recall_position(per_query_ranked, relevants))


def evaluate(run: dict[str, QueryRun],
             gold: list[GoldenStandard]) -> tuple[MetricReport, MetricReport]:
    """Metric reports for query matches and networks. Every gold query must
    be present in the run; the reports do not depend on gold order."""
    missing = sorted(g.query for g in gold if g.query not in run)
    if missing:
        raise ValueError(f"gold queries missing from the run: {missing}")
    ordered = sorted(gold, key=lambda g: g.query)
    qm_lists = [run[g.query].qms for g in ordered]
    cjn_lists = [run[g.query].cjns for g in ordered]
    qm_report = _report(qm_lists, [g.relevant_qm for g in ordered])
    cjn_report = _report(cjn_lists, [g.relevant_cjn for g in ordered])
    return qm_report, cjn_report


def render_reports(qm_report: MetricReport, cjn_report: MetricReport) -> str:
    """Aligned plain-text table for both reports."""
    rows = [("metric", "qm", "cjn"),
            ("mrr", f"{qm_report.mrr:.4f}", f"{cjn_report.mrr:.4f}"),
            ("recall", f"{qm_report.recall:.4f}", f"{cjn_report.recall:.4f}")]
    for k in R_AT_K_RANGE:
        rows.append((f"r@{k}", f"{qm_report.r_at_k[k]:.4f}",
                     f"{cjn_report.r_at_k[k]:.4f}"))
    rows.append(("max_recall_position",
                 str(qm_report.max_recall_position),
                 str(cjn_report.max_recall_position)))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in rows]
    return "\n".join(lines)
