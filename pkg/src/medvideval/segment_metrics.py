"""Temporal visual-answer localization scoring: IoU, relaxed IoU, mIoU, R@n.

A candidate only scores when its video is positively judged for the question;
within such a video the best overlap against any assessed answer interval
counts.  Per-question scores at depth n take the best candidate among the
top n, which is what makes mIoU grow with n.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import QuestionId, TimeInterval, intersection_length, union_length
from .io_formats import JudgedVideo, LocalizationCandidate, MetricReport

DEFAULT_N_VALUES = (1, 3, 5, 10)
DEFAULT_MU_VALUES = (0.3, 0.5, 0.7)


def temporal_iou(pred: TimeInterval, gt: TimeInterval) -> float:
    """Intersection over union of two intervals; 0 when both are zero-length."""
    union = union_length(pred, gt)
    if union == 0.0:
        return 0.0
    return intersection_length(pred, gt) / union


def extend_interval(interval: TimeInterval, lam: float) -> TimeInterval:
    """Widen an interval by lam seconds on each side, clamping the start at 0."""
    if lam < 0:
        raise ValueError(f"extension must be >= 0, got {lam}")
    return TimeInterval(max(0.0, interval.start - lam), interval.end + lam)


def relaxed_iou(pred: TimeInterval, gt: TimeInterval, lam: float) -> float:
    """IoU after extending both intervals by lam; lam = 0 is plain IoU."""
    return temporal_iou(extend_interval(pred, lam), extend_interval(gt, lam))


def question_iou(
    candidates: Sequence[LocalizationCandidate],
    judged: Sequence[JudgedVideo],
    lam: float = 0.0,
) -> float:
    """Best gated IoU over an already-truncated (top-n) candidate list.

    Candidates in videos that are not positively judged score 0; otherwise
    the best overlap against any of that video's answer intervals counts.
    """
    answers_by_video = {jv.video: jv.answers for jv in judged if jv.grade.is_positive}
    best = 0.0
    for candidate in candidates:
        for answer in answers_by_video.get(candidate.video, ()):
            value = relaxed_iou(candidate.interval, answer, lam)
            if value > best:
                best = value
    return best


def mean_iou(
    run: Mapping[QuestionId, Sequence[LocalizationCandidate]],
    qrels: Mapping[QuestionId, Sequence[JudgedVideo]],
    n: int,
    lam: float = 0.0,
) -> float:
    """Mean over every judged question of the best IoU among its top-n candidates.

    The divisor is the number of judged questions, so unanswered questions
    drag the mean down rather than disappearing.
    """
    if n < 1:
        raise ValueError(f"depth n must be >= 1, got {n}")
    if not qrels:
        return 0.0
    total = sum(question_iou(list(run.get(qid, ()))[:n], qrels[qid], lam) for qid in sorted(qrels))
    return total / len(qrels)


def recall_at_n_iou(
    run: Mapping[QuestionId, Sequence[LocalizationCandidate]],
    qrels: Mapping[QuestionId, Sequence[JudgedVideo]],
    n: int,
    mu: float,
    lam: float = 0.0,
) -> float:
    """Percentage of questions whose best top-n IoU reaches mu (boundary counts)."""
    if n < 1:
        raise ValueError(f"depth n must be >= 1, got {n}")
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"threshold mu must be in (0, 1], got {mu}")
    if not qrels:
        return 0.0
    hits = sum(
        1
        for qid in sorted(qrels)
        if question_iou(list(run.get(qid, ()))[:n], qrels[qid], lam) >= mu
    )
    return 100.0 * hits / len(qrels)


@dataclass(frozen=True)
class IoUParams:
    """Evaluation grid: candidate depths, IoU thresholds, and the extension."""

    n_values: tuple[int, ...] = DEFAULT_N_VALUES
    mu_values: tuple[float, ...] = DEFAULT_MU_VALUES
    lam: float = 0.0

    def __post_init__(self) -> None:
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise ValueError("n_values must be positive integers")
        if not self.mu_values or any(not 0.0 < mu <= 1.0 for mu in self.mu_values):
            raise ValueError("mu_values must lie in (0, 1]")
        if self.lam < 0:
            raise ValueError(f"extension must be >= 0, got {self.lam}")
        object.__setattr__(self, "n_values", tuple(sorted(self.n_values)))
        object.__setattr__(self, "mu_values", tuple(sorted(self.mu_values)))


@dataclass
class LocalizationScore:
    """Per-question best IoU at each depth plus the rendered percentage table."""

    params: IoUParams
    question_count: int
    per_question: dict[QuestionId, dict[int, float]]
    table: dict[int, dict[str, float]]


def evaluate_localization(
    run: Mapping[QuestionId, Sequence[LocalizationCandidate]],
    qrels: Mapping[QuestionId, Sequence[JudgedVideo]],
    params: IoUParams = IoUParams(),
    threads: int = 1,
) -> LocalizationScore:
    """Build the full depth-by-threshold table for one localization run.

    Table cells are percentages: R@n IoU=mu columns and mIoU alike, matching
    how localization results are conventionally tabulated.
    """
    question_ids = sorted(qrels)
    max_n = max(params.n_values)

    def best_prefix(qid: QuestionId) -> list[float]:
        judged = qrels[qid]
        answers_by_video = {jv.video: jv.answers for jv in judged if jv.grade.is_positive}
        best = 0.0
        prefix = []
        for candidate in list(run.get(qid, ()))[:max_n]:
            for answer in answers_by_video.get(candidate.video, ()):
                value = relaxed_iou(candidate.interval, answer, params.lam)
                if value > best:
                    best = value
            prefix.append(best)
        return prefix

    from .parallel import parallel_map  # local import avoids a cycle at module load

    prefixes = dict(zip(question_ids, parallel_map(best_prefix, question_ids, threads)))

    per_question: dict[QuestionId, dict[int, float]] = {}
    for qid in question_ids:
        prefix = prefixes[qid]
        per_question[qid] = {
            n: (prefix[min(n, len(prefix)) - 1] if prefix else 0.0) for n in params.n_values
        }

    table: dict[int, dict[str, float]] = {}
    count = len(question_ids)
    for n in params.n_values:
        values = [per_question[qid][n] for qid in question_ids]
        row = {}
        for mu in params.mu_values:
            hits = sum(1 for value in values if value >= mu)
            row[f"IoU={mu:g}"] = 100.0 * hits / count if count else 0.0
        row["mIoU"] = 100.0 * sum(values) / count if count else 0.0
        table[n] = row
    return LocalizationScore(params, count, per_question, table)


def localization_report(score: LocalizationScore) -> MetricReport:
    values = {f"n={n}": dict(row) for n, row in score.table.items()}
    return MetricReport(
        name="localization",
        params={
            "n": list(score.params.n_values),
            "mu": list(score.params.mu_values),
            "lambda": score.params.lam,
            "multi_answer_reduction": "max",
            "video_gate_min_grade": 1,
            "units": "percent",
            "num_questions": score.question_count,
        },
        values=values,
    )
