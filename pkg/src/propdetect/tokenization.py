"""Offset-preserving tokenization and span <-> token label conversion."""

from __future__ import annotations

import bisect
import re
from collections.abc import Sequence
from dataclasses import dataclass

from .corpus import Article, PropagandaSpan

__all__ = [
    "TaggedSequence",
    "Token",
    "decode_spans",
    "project_spans",
    "split_sequences",
    "tagged_sequences",
    "tokenize",
]

# A run of word characters, or a single non-space, non-word character.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int


@dataclass(frozen=True)
class TaggedSequence:
    article_id: str
    tokens: tuple[Token, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.labels):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.labels)} labels")
        if any(v not in (0, 1) for v in self.labels):
            raise ValueError("labels must be 0 or 1")


def split_sequences(article: Article | str) -> list[tuple[str, int]]:
    """Split text at ``\\n`` into ``(line, absolute_start)`` pairs.

    Empty lines are kept so offsets stay aligned; empty text gives ``[]``.
    """
    text = article.text if isinstance(article, Article) else article
    if not text:
        return []
    out = []
    pos = 0
    for line in text.split("\n"):
        out.append((line, pos))
        pos += len(line) + 1
    return out


def tokenize(text: str, base_offset: int = 0) -> list[Token]:
    return [Token(m.group(), m.start() + base_offset, m.end() + base_offset)
            for m in _TOKEN_RE.finditer(text)]


def project_spans(tokens: Sequence[Token],
                  spans: Sequence[PropagandaSpan]) -> list[int]:
    """Label a token 1 when it shares at least one character with any span."""
    if not spans:
        return [0] * len(tokens)
    # Merge spans so a single bisect finds the only candidate interval.
    merged: list[list[int]] = []
    for s in sorted(spans, key=lambda s: (s.begin, s.end)):
        if merged and s.begin <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], s.end)
        else:
            merged.append([s.begin, s.end])
    begins = [b for b, _ in merged]
    labels = []
    for tok in tokens:
        # Last merged interval starting before the token ends.
        i = bisect.bisect_left(begins, tok.end) - 1
        labels.append(int(i >= 0 and merged[i][1] > tok.start
                          and tok.end > tok.start))
    return labels


def decode_spans(tokens: Sequence[Token], labels: Sequence[int],
                 article_id: str = "0") -> list[PropagandaSpan]:
    """Turn each maximal run of 1-labelled tokens into one span."""
    if len(tokens) != len(labels):
        raise ValueError(
            f"length mismatch: {len(tokens)} tokens, {len(labels)} labels")
    spans = []
    run_start = None
    run_end = None
    for tok, lab in zip(tokens, labels):
        if lab:
            if run_start is None:
                run_start = tok.start
            run_end = tok.end
        elif run_start is not None:
            spans.append(PropagandaSpan(article_id, run_start, run_end))
            run_start = None
    if run_start is not None:
        spans.append(PropagandaSpan(article_id, run_start, run_end))
    return spans


def tagged_sequences(article: Article, spans: Sequence[PropagandaSpan],
                     *, keep_empty: bool = False) -> list[TaggedSequence]:
    """Tokenize an article line by line and attach projected gold labels."""
    own = [s for s in spans if s.article_id == article.id]
    out = []
    for line, start in split_sequences(article):
        tokens = tokenize(line, start)
        if not tokens and not keep_empty:
            continue
        out.append(TaggedSequence(article.id, tuple(tokens),
                                  tuple(project_spans(tokens, own))))
    return out
