"""Graded-judgment retrieval scoring: MAP, P@k, R@k, nDCG, and run rollups.

Binary relevance for MAP/P/R counts every positive grade (possibly or
definitely relevant).  nDCG uses linear gains over the full run depth,
normalized by the ideal ordering of all judged documents.  Questions with no
relevant documents contribute 0, so macro averages are deterministic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import QuestionId, ToolkitWarning, VideoId
from .io_formats import JudgedVideo, MetricReport, RetrievalRunEntry


def _positive_videos(judged: Sequence[JudgedVideo]) -> set[VideoId]:
    return {jv.video for jv in judged if jv.grade.is_positive}


def average_precision(ranking: Sequence[VideoId], judged: Sequence[JudgedVideo]) -> float:
    """Mean of precision at each relevant retrieved position, over all relevant."""
    relevant = _positive_videos(judged)
    if not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for position, video in enumerate(ranking, start=1):
        if video in relevant:
            hits += 1
            total += hits / position
    return total / len(relevant)


def precision_at_k(ranking: Sequence[VideoId], judged: Sequence[JudgedVideo], k: int) -> float:
    if k < 1:
        raise ValueError(f"cutoff k must be >= 1, got {k}")
    relevant = _positive_videos(judged)
    hits = sum(1 for video in ranking[:k] if video in relevant)
    return hits / k


def recall_at_k(ranking: Sequence[VideoId], judged: Sequence[JudgedVideo], k: int) -> float:
    if k < 1:
        raise ValueError(f"cutoff k must be >= 1, got {k}")
    relevant = _positive_videos(judged)
    if not relevant:
        return 0.0
    hits = sum(1 for video in ranking[:k] if video in relevant)
    return hits / len(relevant)


def ndcg(ranking: Sequence[VideoId], judged: Sequence[JudgedVideo]) -> float:
    """Linear-gain nDCG over the full ranking, ideal over all judged documents."""
    grades = {jv.video: int(jv.grade) for jv in judged}
    ideal = sorted(grades.values(), reverse=True)
    idcg = sum(g / math.log2(i + 1) for i, g in enumerate(ideal, start=1) if g > 0)
    if idcg == 0.0:
        return 0.0
    dcg = sum(grades.get(v, 0) / math.log2(i + 1) for i, v in enumerate(ranking, start=1))
    return dcg / idcg


@dataclass
class RetrievalScore:
    """Per-question metric rows plus macro averages, with the cutoffs used."""

    ks: tuple[int, ...]
    per_question: dict[QuestionId, dict[str, float]]
    macro: dict[str, float]


def _metric_keys(ks: Sequence[int]) -> list[str]:
    keys = ["MAP"]
    keys += [f"R@{k}" for k in ks]
    keys += [f"P@{k}" for k in ks]
    keys.append("nDCG")
    return keys


def evaluate_retrieval(
    run: Mapping[QuestionId, Sequence[RetrievalRunEntry]],
    qrels: Mapping[QuestionId, Sequence[JudgedVideo]],
    ks: Sequence[int] = (5, 10),
) -> RetrievalScore:
    """Macro-average the metrics over every question in the judgments.

    Questions missing from the run score 0; run questions absent from the
    judgments are ignored with a warning.
    """
    if not ks:
        raise ValueError("at least one cutoff k is required")
    cutoffs = tuple(sorted({int(k) for k in ks}))
    if cutoffs[0] < 1:
        raise ValueError(f"cutoffs must be >= 1, got {cutoffs[0]}")
    for qid in run:
        if qid not in qrels:
            warnings.warn(
                ToolkitWarning(f"run question {qid!r} has no judgments; ignoring it"),
                stacklevel=2,
            )
    per_question: dict[QuestionId, dict[str, float]] = {}
    for qid in sorted(qrels):
        judged = qrels[qid]
        ranking = [entry.video for entry in run.get(qid, ())]
        row = {"MAP": average_precision(ranking, judged)}
        for k in cutoffs:
            row[f"R@{k}"] = recall_at_k(ranking, judged, k)
        for k in cutoffs:
            row[f"P@{k}"] = precision_at_k(ranking, judged, k)
        row["nDCG"] = ndcg(ranking, judged)
        per_question[qid] = row
    count = len(per_question)
    macro = {
        key: (sum(row[key] for row in per_question.values()) / count if count else 0.0)
        for key in _metric_keys(cutoffs)
    }
    return RetrievalScore(cutoffs, per_question, macro)


def retrieval_report(score: RetrievalScore) -> MetricReport:
    values: dict[str, object] = dict(score.macro)
    values["per_question"] = {qid: dict(row) for qid, row in score.per_question.items()}
    return MetricReport(
        name="retrieval",
        params={
            "k": list(score.ks),
            "binary_relevance_min_grade": 1,
            "ndcg_gain": "linear",
            "ndcg_depth": "full",
            "num_questions": len(score.per_question),
        },
        values=values,
    )
