"""Ranking metrics at a cutoff: DCG, NDCG, MRR, P/R/F1 and MAP.

Gains are the raw graded judgments with a log2(rank + 1) discount. A
document counts as relevant when its grade is >= 1; unjudged documents
have grade 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

from ..corpus import RelevanceJudgments
from ..errors import InputError
from ..rerank import RankedList

log = logging.getLogger(__name__)

METRICS = ("dcg", "ndcg", "mrr", "precision", "recall", "f1", "map")
LABELS = {
    "dcg": "DCG",
    "ndcg": "NDCG",
    "mrr": "MRR",
    "precision": "Precision",
    "recall": "Recall",
    "f1": "F1-score",
    "map": "MAP",
}
# DCG is unbounded and reported raw; the rate metrics are shown x100.
SCALE = {m: (1.0 if m == "dcg" else 100.0) for m in METRICS}


def _check_k(k: int) -> None:
    if k < 1:
        raise InputError("cutoff k must be >= 1")


def _top(ranked: RankedList, k: int) -> list[str]:
    return [e.doc_id for e in ranked.entries[:k]]


def _dcg(gains) -> float:
    return math.fsum(g / math.log2(i + 1) for i, g in enumerate(gains, start=1))


def dcg_at_k(ranked: RankedList, qrels: RelevanceJudgments, k: int = 10) -> float:
    _check_k(k)
    grades = qrels.grades(ranked.query_id)
    return _dcg(grades.get(d, 0) for d in _top(ranked, k))


def ndcg_at_k(ranked: RankedList, qrels: RelevanceJudgments, k: int = 10) -> float | None:
    """NDCG@k, or None when the query has no judged-relevant document."""
    _check_k(k)
    grades = qrels.grades(ranked.query_id)
    ideal = _dcg(sorted(grades.values(), reverse=True)[:k])
    if ideal == 0.0:
        return None
    return dcg_at_k(ranked, qrels, k) / ideal


def mrr_at_k(ranked: RankedList, qrels: RelevanceJudgments, k: int = 10) -> float:
    _check_k(k)
    relevant = qrels.relevant(ranked.query_id)
    for i, d in enumerate(_top(ranked, k), start=1):
        if d in relevant:
            return 1.0 / i
    return 0.0


def precision_recall_f1_at_k(ranked: RankedList, qrels: RelevanceJudgments,
                             k: int = 10) -> tuple[float, float | None, float]:
    """(P@k, R@k, F1@k). P divides by k, not by the number retrieved.

    Recall is None when nothing is judged relevant.
    """
    _check_k(k)
    relevant = qrels.relevant(ranked.query_id)
    hits = sum(1 for d in _top(ranked, k) if d in relevant)
    p = hits / k
    r = hits / len(relevant) if relevant else None
    rr = r or 0.0
    f1 = 2 * p * rr / (p + rr) if p + rr > 0 else 0.0
    return p, r, f1


def map_at_k(ranked: RankedList, qrels: RelevanceJudgments, k: int = 10) -> float | None:
    """Average precision at k normalized by min(|relevant|, k); None without relevant docs."""
    _check_k(k)
    relevant = qrels.relevant(ranked.query_id)
    if not relevant:
        return None
    hits = 0
    total = 0.0
    for i, d in enumerate(_top(ranked, k), start=1):
        if d in relevant:
            hits += 1
            total += hits / i
    return total / min(len(relevant), k)


def query_metrics(ranked: RankedList, qrels: RelevanceJudgments, k: int = 10) -> dict[str, float | None]:
    p, r, f1 = precision_recall_f1_at_k(ranked, qrels, k)
    return {
        "dcg": dcg_at_k(ranked, qrels, k),
        "ndcg": ndcg_at_k(ranked, qrels, k),
        "mrr": mrr_at_k(ranked, qrels, k),
        "precision": p,
        "recall": r,
        "f1": f1,
        "map": map_at_k(ranked, qrels, k),
    }


@dataclass
class RetrievalMetricsReport:
    """Macro-averaged metrics in table scale, plus the per-query values they average."""

    k: int
    metrics: dict[str, float]
    per_query: dict[str, dict[str, float | None]]
    counts: dict[str, int]
    num_queries: int
    excluded: dict[str, int] = field(default_factory=dict)
    unknown_queries: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "num_queries": self.num_queries,
            "metrics": {f"{LABELS[m]}@{self.k}": self.metrics[m] for m in METRICS},
            "counts": self.counts,
            "excluded": self.excluded,
            "unknown_queries": self.unknown_queries,
            "per_query": self.per_query,
        }


def evaluate_run(runs: Mapping[str, RankedList], qrels: RelevanceJudgments, k: int = 10) -> RetrievalMetricsReport:
    """Score every run query that also has judgments.

    Run queries missing from the qrels are reported and skipped. Queries
    without a relevant judgment are left out of the NDCG, Recall and MAP
    averages; the number left out is recorded in ``excluded``.
    """
    _check_k(k)
    unknown = sorted(q for q in runs if q not in qrels)
    for q in unknown:
        log.warning("run query %r has no relevance judgments; excluded", q)
    qids = sorted(q for q in runs if q in qrels)
    per_query: dict[str, dict[str, float | None]] = {}
    for qid in qids:
        raw = query_metrics(runs[qid], qrels, k)
        per_query[qid] = {m: (None if v is None else v * SCALE[m]) for m, v in raw.items()}
    metrics, counts, excluded = {}, {}, {}
    for m in METRICS:
        values = [per_query[q][m] for q in qids if per_query[q][m] is not None]
        counts[m] = len(values)
        excluded[m] = len(qids) - len(values)
        metrics[m] = math.fsum(values) / len(values) if values else 0.0
    return RetrievalMetricsReport(
        k=k, metrics=metrics, per_query=per_query, counts=counts, num_queries=len(qids),
        excluded=excluded, unknown_queries=unknown,
    )


def format_table(columns: Mapping[str, RetrievalMetricsReport], digits: int = 2) -> str:
    """Aligned text table: one row per metric, one column per labelled report."""
    if not columns:
        return ""
    names = list(columns)
    k = next(iter(columns.values())).k
    rows = [["Metric", *names]]
    for m in METRICS:
        rows.append([f"{LABELS[m]}@{k}", *(f"{columns[n].metrics[m]:.{digits}f}" for n in names)])
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for j, r in enumerate(rows):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
