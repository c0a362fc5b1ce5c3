"""Precision / recall / F1 scoring for both subtasks.

Zero denominators yield 0 rather than raising, so an empty prediction
file still gets a score.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

from .corpus import PropagandaSpan, TechniqueLabel, TechniqueSpan

__all__ = [
    "AlignmentError",
    "ClassScore",
    "ConfusionCounts",
    "PRF",
    "ScoreReport",
    "harmonic_f1",
    "prf",
    "score_si",
    "score_tc",
]


class AlignmentError(ValueError):
    """Predicted TC records do not line up with the gold records."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int | None = None

    def __post_init__(self):
        for name in ("tp", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.tn is not None and self.tn < 0:
            raise ValueError("tn must be non-negative")

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        tn = None if self.tn is None or other.tn is None else self.tn + other.tn
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, tn)


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float
    accuracy: float | None = None


def _ratio(num: int | float, den: int | float) -> float:
    return num / den if den else 0.0


def harmonic_f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def prf(counts: ConfusionCounts) -> PRF:
    p = _ratio(counts.tp, counts.tp + counts.fp)
    r = _ratio(counts.tp, counts.tp + counts.fn)
    # 2PR/(P+R) rewritten on counts; exact when fp == fn, so micro-F1
    # equals accuracy bit for bit in the single-label case.
    f1 = _ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn)
    acc = None
    if counts.tn is not None:
        total = counts.tp + counts.tn + counts.fp + counts.fn
        acc = _ratio(counts.tp + counts.tn, total)
    return PRF(p, r, f1, acc)


@dataclass(frozen=True)
class ClassScore:
    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ScoreReport:
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts
    aggregation: str = "micro"
    accuracy: float | None = None
    per_class: dict[TechniqueLabel, ClassScore] = field(default_factory=dict)
    # Mean F1 over classes present in gold, and over all 14 classes.
    macro_f1: float | None = None
    macro_f1_all: float | None = None


def _merge(intervals: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[list[int]] = []
    for b, e in sorted(intervals):
        if out and b <= out[-1][1]:
            out[-1][1] = max(out[-1][1], e)
        else:
            out.append([b, e])
    return [(b, e) for b, e in out]


def _covered(merged: list[tuple[int, int]]) -> int:
    return sum(e - b for b, e in merged)


def _intersection(a: list[tuple[int, int]], b: list[tuple[int, int]]) -> int:
    i = j = total = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            total += hi - lo
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return total


def score_si(gold: Sequence[PropagandaSpan],
             pred: Sequence[PropagandaSpan]) -> ScoreReport:
    """Character-level overlap score, pooled over articles.

    Spans on one side are unioned first, so overlapping or split spans
    covering the same characters score identically.
    """
    by_article: dict[str, tuple[list, list]] = defaultdict(lambda: ([], []))
    for s in gold:
        by_article[s.article_id][0].append((s.begin, s.end))
    for s in pred:
        by_article[s.article_id][1].append((s.begin, s.end))

    tp = fp = fn = 0
    for g, p in by_article.values():
        g, p = _merge(g), _merge(p)
        inter = _intersection(g, p)
        tp += inter
        fp += _covered(p) - inter
        fn += _covered(g) - inter
    counts = ConfusionCounts(tp, fp, fn)
    precision, recall, f1, _ = prf(counts)
    return ScoreReport(precision, recall, f1, counts, aggregation="micro")


def score_tc(gold: Sequence[TechniqueSpan],
             pred: Sequence[TechniqueSpan]) -> ScoreReport:
    """Per-class and pooled scores for aligned technique predictions.

    Records are matched on ``(article_id, begin, end)``. A span listed
    several times (multi-label) is matched as a multiset of labels.
    """
    def group(spans):
        out: dict[tuple, Counter] = defaultdict(Counter)
        for s in spans:
            out[(s.article_id, s.begin, s.end)][s.technique] += 1
        return out

    g_groups, p_groups = group(gold), group(pred)
    for key, labels in p_groups.items():
        if key not in g_groups:
            raise AlignmentError(f"predicted span {key} has no gold counterpart")
        if sum(labels.values()) != sum(g_groups[key].values()):
            raise AlignmentError(f"record count differs for span {key}")
    for key in g_groups:
        if key not in p_groups:
            raise AlignmentError(f"gold span {key} has no prediction")

    tp: Counter = Counter()
    fp: Counter = Counter()
    fn: Counter = Counter()
    for key, g_labels in g_groups.items():
        p_labels = p_groups[key]
        hit = g_labels & p_labels
        tp.update(hit)
        fn.update(g_labels - hit)
        fp.update(p_labels - hit)

    per_class = {}
    for label in TechniqueLabel:
        c = ConfusionCounts(tp[label], fp[label], fn[label])
        p, r, f1, _ = prf(c)
        per_class[label] = ClassScore(c, p, r, f1)

    pooled = ConfusionCounts(sum(tp.values()), sum(fp.values()), sum(fn.values()))
    precision, recall, f1, _ = prf(pooled)
    present = [lab for lab in TechniqueLabel if tp[lab] + fn[lab] > 0]
    macro = (sum(per_class[lab].f1 for lab in present) / len(present)
             if present else 0.0)
    macro_all = sum(cs.f1 for cs in per_class.values()) / len(per_class)
    accuracy = _ratio(pooled.tp, len(gold))
    return ScoreReport(precision, recall, f1, pooled, aggregation="micro",
                       accuracy=accuracy, per_class=per_class,
                       macro_f1=macro, macro_f1_all=macro_all)
